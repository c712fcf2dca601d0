#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "judgeagg/gateway.hpp"
#include "judgeagg/rng.hpp"

using namespace judgeagg;

TEST_CASE("judge parser accepts every rubric-conformant value") {
    for (int tenths = 0; tenths <= 40; ++tenths) {
        std::string text = std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
        INFO(text);
        CHECK(parse_judge_score(text) == Catch::Approx(tenths / 10.0));
    }
    CHECK(parse_judge_score("3.8") == 3.8);
    CHECK(parse_judge_score("0.0") == 0.0);
    CHECK(parse_judge_score("4") == 4.0);
    CHECK(parse_judge_score("  2.5\n") == 2.5);
    CHECK(parse_judge_score("\t4.0  ") == 4.0);
}

TEST_CASE("judge parser rejects out-of-range values with the right kind") {
    for (const char* text : {"4.1", "5", "-1.0", "-0.1", "10.0"}) {
        INFO(text);
        CHECK_THROWS_MATCHES(parse_judge_score(text), ParseError,
                             Catch::Matchers::Predicate<ParseError>([](const ParseError& e) {
                                 return e.kind() == ParseError::Kind::OutOfRange;
                             }));
    }
}

TEST_CASE("judge parser rejects malformed output with the right kind") {
    for (const char* text : {"The score is 3.8", "3.8 2.1", "3.85", "", "  ", "3.", "+3.8",
                             "score: 2", "3,8", "two", "2.5/4", "NaN", "inf", "0x3", "--1",
                             "1e2", "4.0."}) {
        INFO('"' << text << '"');
        CHECK_THROWS_MATCHES(parse_judge_score(text), ParseError,
                             Catch::Matchers::Predicate<ParseError>([](const ParseError& e) {
                                 return e.kind() == ParseError::Kind::Malformed;
                             }));
    }
}

TEST_CASE("persona parser accepts the rubric JSON") {
    auto j = parse_persona_judgment(R"({"analysis": "Clear and useful.", "score": 7})",
                                    PersonaId::Student);
    CHECK(j.persona == PersonaId::Student);
    CHECK(j.analysis == "Clear and useful.");
    CHECK(j.score == 7);
    CHECK(parse_persona_judgment(R"({"analysis": "x", "score": 10})", PersonaId::Ceo).score ==
          10);
    CHECK(parse_persona_judgment(R"({"analysis": "x", "score": 0})", PersonaId::Ceo).score == 0);
    CHECK(parse_persona_judgment("  \n {\"score\": 3, \"analysis\": \"ok\"} \n", PersonaId::Ceo)
              .score == 3);
}

TEST_CASE("persona parser strips a single markdown code fence") {
    CHECK(parse_persona_judgment("```json\n{\"analysis\": \"x\", \"score\": 4}\n```",
                                 PersonaId::Parent)
              .score == 4);
    CHECK(parse_persona_judgment("```\n{\"analysis\": \"x\", \"score\": 4}\n```",
                                 PersonaId::Parent)
              .score == 4);
}

TEST_CASE("persona parser rejects rubric violations with typed errors") {
    auto kind_of = [](const std::string& text) {
        try {
            parse_persona_judgment(text, PersonaId::Child);
        } catch (const ParseError& e) {
            return e.kind();
        }
        FAIL("expected ParseError");
        return ParseError::Kind::Malformed;
    };
    CHECK(kind_of(R"({"analysis": "x", "score": 7, "why": "because"})") ==
          ParseError::Kind::ExtraKeys);
    CHECK(kind_of(R"({"analysis": "x", "score": 11})") == ParseError::Kind::ScoreRange);
    CHECK(kind_of(R"({"analysis": "x", "score": -1})") == ParseError::Kind::ScoreRange);
    CHECK(kind_of(R"({"analysis": "x", "score": 7.5})") == ParseError::Kind::NonIntegerScore);
    CHECK(kind_of(R"({"analysis": "x", "score": "7"})") == ParseError::Kind::NonIntegerScore);
    CHECK(kind_of(R"({"analysis": "x"})") == ParseError::Kind::Malformed);
    CHECK(kind_of(R"({"score": 7})") == ParseError::Kind::Malformed);
    CHECK(kind_of(R"({"analysis": 3, "score": 7})") == ParseError::Kind::Malformed);
    CHECK(kind_of("not json at all") == ParseError::Kind::Malformed);
    CHECK(kind_of("[1,2,3]") == ParseError::Kind::Malformed);
    CHECK(kind_of("") == ParseError::Kind::Malformed);
    CHECK(kind_of("{\"analysis\": \"x\", \"score\": 7") == ParseError::Kind::Malformed);
}

TEST_CASE("parsers are total under randomized fuzzing") {
    // Every input either parses or raises a typed ParseError; nothing else
    // may escape. Mix raw bytes with mutated near-valid payloads.
    Rng rng(0xf22d);
    const std::string seeds[] = {
        "3.8",
        "{\"analysis\": \"x\", \"score\": 7}",
        "```json\n{\"analysis\": \"y\", \"score\": 10}\n```",
        "The score is 3.8",
        "{\"score\": 11}",
    };
    for (int i = 0; i < 10000; ++i) {
        std::string text;
        if (rng.uniform01() < 0.5) {
            auto len = rng.uniform_below(64);
            for (std::uint64_t k = 0; k < len; ++k) {
                text.push_back(static_cast<char>(rng.uniform_below(256)));
            }
        } else {
            text = seeds[rng.uniform_below(std::size(seeds))];
            auto mutations = 1 + rng.uniform_below(6);
            for (std::uint64_t m = 0; m < mutations && !text.empty(); ++m) {
                auto pos = rng.uniform_below(text.size());
                switch (rng.uniform_below(3)) {
                    case 0: text[pos] = static_cast<char>(rng.uniform_below(256)); break;
                    case 1: text.erase(pos, 1); break;
                    default:
                        text.insert(pos, 1, static_cast<char>(rng.uniform_below(256)));
                        break;
                }
            }
        }
        try {
            (void)parse_judge_score(text);
        } catch (const ParseError&) {
        }
        try {
            (void)parse_persona_judgment(text, PersonaId::Skeptic);
        } catch (const ParseError&) {
        }
    }
    SUCCEED("10,000 fuzz cases produced values or typed errors only");
}
