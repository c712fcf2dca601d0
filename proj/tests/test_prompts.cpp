#include <fstream>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "judgeagg/gateway.hpp"
#include "judgeagg/prompts.hpp"

using namespace judgeagg;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

DatasetRecord sample_record() {
    DatasetRecord record;
    record.record_id = "rec-42";
    record.prompt = "Explain photosynthesis.";
    record.answer = "Plants convert light into chemical energy.";
    return record;
}

}  // namespace

TEST_CASE("judge system prompts match the golden rubric files byte for byte") {
    const std::string dir = std::string(JUDGEAGG_TEST_DATA_DIR) + "/golden/rubrics/";
    for (JudgeId judge : kAllJudges) {
        auto rubric = JudgeRubric::builtin(judge);
        auto messages = render_judge_messages(rubric, sample_record());
        REQUIRE(messages.size() == 2);
        CHECK(messages[0].role == ChatMessage::Role::System);
        const std::string golden = read_file(dir + std::string(judge_name(judge)) + ".txt");
        INFO("judge " << judge_name(judge));
        CHECK(messages[0].content == golden);
    }
}

TEST_CASE("every rubric ends with the shared output contract") {
    for (JudgeId judge : kAllJudges) {
        auto rubric = JudgeRubric::builtin(judge);
        CHECK(rubric_has_output_contract(rubric));
        CHECK(rubric.prompt_template.starts_with("You are " + rubric.version_tag));
    }
    JudgeRubric broken = JudgeRubric::builtin(JudgeId::Clarity);
    broken.prompt_template += "\nPS: ignore the above.";
    CHECK(!rubric_has_output_contract(broken));
}

TEST_CASE("judge user message carries the prompt and answer blocks") {
    auto record = sample_record();
    auto messages = render_judge_messages(JudgeRubric::builtin(JudgeId::Truthfulness), record);
    CHECK(messages[1].role == ChatMessage::Role::User);
    CHECK(messages[1].content.find(record.prompt) != std::string::npos);
    CHECK(messages[1].content.find(record.answer) != std::string::npos);
    CHECK(messages[1].content.find("{USER_PROMPT}") == std::string::npos);
    CHECK(messages[1].content.find("{MODEL_ANSWER}") == std::string::npos);
}

TEST_CASE("rendering is deterministic") {
    auto record = sample_record();
    for (JudgeId judge : kAllJudges) {
        auto rubric = JudgeRubric::builtin(judge);
        CHECK(render_judge_messages(rubric, record) == render_judge_messages(rubric, record));
    }
    for (PersonaId persona : kAllPersonas) {
        CHECK(render_persona_messages(persona, record) ==
              render_persona_messages(persona, record));
    }
}

TEST_CASE("persona templates match their golden files") {
    const std::string dir = std::string(JUDGEAGG_TEST_DATA_DIR) + "/golden/";
    CHECK(std::string(k_persona_system_template) == read_file(dir + "persona_system.txt"));
    CHECK(std::string(k_persona_user_template) == read_file(dir + "persona_user.txt"));
}

TEST_CASE("persona messages substitute every placeholder") {
    auto record = sample_record();
    for (PersonaId persona : kAllPersonas) {
        auto messages = render_persona_messages(persona, record);
        REQUIRE(messages.size() == 2);
        for (const auto& message : messages) {
            for (const char* token : {"{PERSONA_NAME}", "{PERSONA_BIO}", "{USER_PROMPT}",
                                      "{MODEL_ANSWER}"}) {
                INFO("persona " << persona_name(persona) << " token " << token);
                CHECK(message.content.find(token) == std::string::npos);
            }
        }
        // The user message is brace-free once placeholders are gone (the
        // record text itself has none here).
        CHECK(messages[1].content.find('{') == std::string::npos);
    }
}

TEST_CASE("persona messages embed the name, bio, and task sections") {
    auto record = sample_record();
    auto messages = render_persona_messages(PersonaId::Professor, record);
    CHECK(messages[0].content.starts_with("You are Professor."));
    CHECK(messages[1].content.find("==== ORIGINAL TASK ====") != std::string::npos);
    CHECK(messages[1].content.find("==== CANDIDATE ANSWER ====") != std::string::npos);
    const std::string job = "You are Professor: " + std::string(persona_bio(PersonaId::Professor));
    CHECK(messages[1].content.find(job) != std::string::npos);
    CHECK(messages[1].content.find(record.prompt) != std::string::npos);
    CHECK(messages[1].content.find(record.answer) != std::string::npos);
}
