#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "judgeagg/core.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/prompts.hpp"

namespace judgeagg {

// ---------------------------------------------------------------------------
// Messages and configuration
// ---------------------------------------------------------------------------

struct ChatMessage {
    enum class Role { System, User };
    Role role = Role::System;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

inline std::string_view role_name(ChatMessage::Role role) {
    return role == ChatMessage::Role::System ? "system" : "user";
}

struct JudgeRubric {
    JudgeId judge = JudgeId::Truthfulness;
    std::string version_tag;
    std::string prompt_template;

    static JudgeRubric builtin(JudgeId id) {
        return JudgeRubric{id, std::string(judge_version_tag(id)),
                           std::string(judge_rubric_text(id))};
    }
};

/// The output contract every judge rubric must end with.
inline constexpr std::string_view kJudgeOutputContract =
    "Return ONLY a single decimal number between 0.0 and 4.0";

inline bool rubric_has_output_contract(const JudgeRubric& rubric) {
    auto pos = rubric.prompt_template.rfind(kJudgeOutputContract);
    if (pos == std::string::npos) return false;
    // Must be the final line of the template.
    return rubric.prompt_template.find('\n', pos) == std::string::npos;
}

struct GatewayConfig {
    std::string endpoint_url;
    std::string model_name;
    std::string api_key_env = "LLM_API_KEY";
    unsigned max_parallel = 4;
    unsigned max_retries = 2;
    double temperature = 0.0;
    std::filesystem::path cache_dir = ".judgeagg-cache";
    bool offline = false;
    // Retries re-sample at a mildly positive temperature to escape repeated
    // format violations.
    double retry_temperature = 0.3;
    unsigned backoff_ms = 250;
};

// ---------------------------------------------------------------------------
// Hashing and cache keys
// ---------------------------------------------------------------------------

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

struct CacheKey {
    std::string digest;

    /// Content hash over everything that determines a request: the model, the
    /// evaluator (judge version tag or persona name), the record, and a
    /// revision hash of the message templates.
    static CacheKey make(std::string_view model_name, std::string_view evaluator_tag,
                         std::string_view record_id, std::string_view template_revision) {
        std::string payload;
        payload.reserve(model_name.size() + evaluator_tag.size() + record_id.size() +
                        template_revision.size() + 3);
        payload.append(model_name);
        payload.push_back('\x1f');
        payload.append(evaluator_tag);
        payload.push_back('\x1f');
        payload.append(record_id);
        payload.push_back('\x1f');
        payload.append(template_revision);
        return CacheKey{sha256_hex(payload)};
    }
};

// ---------------------------------------------------------------------------
// Prompt rendering
// ---------------------------------------------------------------------------

inline void replace_all(std::string& text, std::string_view token, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
}

inline std::vector<ChatMessage> render_judge_messages(const JudgeRubric& rubric,
                                                      const DatasetRecord& record) {
    std::string user(k_judge_user_template);
    replace_all(user, "{USER_PROMPT}", record.prompt);
    replace_all(user, "{MODEL_ANSWER}", record.answer);
    return {{ChatMessage::Role::System, rubric.prompt_template},
            {ChatMessage::Role::User, std::move(user)}};
}

inline std::vector<ChatMessage> render_persona_messages(PersonaId persona,
                                                        const DatasetRecord& record) {
    std::string system(k_persona_system_template);
    replace_all(system, "{PERSONA_NAME}", persona_name(persona));
    std::string user(k_persona_user_template);
    replace_all(user, "{USER_PROMPT}", record.prompt);
    replace_all(user, "{MODEL_ANSWER}", record.answer);
    replace_all(user, "{PERSONA_NAME}", persona_name(persona));
    replace_all(user, "{PERSONA_BIO}", persona_bio(persona));
    return {{ChatMessage::Role::System, std::move(system)},
            {ChatMessage::Role::User, std::move(user)}};
}

// ---------------------------------------------------------------------------
// Output parsing
// ---------------------------------------------------------------------------

inline std::string_view trim_view(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Accepts exactly one decimal number with at most one fractional digit,
/// optionally negative, surrounded by nothing but whitespace. Anything else
/// (prose, several numbers, two decimals) is a format violation.
inline double parse_judge_score(std::string_view raw) {
    std::string_view s = trim_view(raw);
    if (s.empty()) throw ParseError(ParseError::Kind::Malformed, "empty judge output");
    std::size_t i = 0;
    if (s[i] == '-') ++i;
    std::size_t digits = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
        ++i;
        ++digits;
    }
    if (digits == 0) {
        throw ParseError(ParseError::Kind::Malformed,
                         "judge output is not a bare decimal number: '" + std::string(raw) + "'");
    }
    if (i < s.size() && s[i] == '.') {
        ++i;
        if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) {
            throw ParseError(ParseError::Kind::Malformed,
                             "trailing decimal point in judge output");
        }
        ++i;  // exactly one fractional digit
    }
    if (i != s.size()) {
        throw ParseError(ParseError::Kind::Malformed,
                         "judge output must be a single number with at most one decimal "
                         "place: '" + std::string(raw) + "'");
    }
    double value = 0.0;
    try {
        value = std::stod(std::string(s));
    } catch (const std::out_of_range&) {
        throw ParseError(ParseError::Kind::OutOfRange, "judge score overflows");
    }
    if (value < kJudgeScoreMin || value > kJudgeScoreMax) {
        throw ParseError(ParseError::Kind::OutOfRange,
                         "judge score outside [0.0, 4.0]: '" + std::string(s) + "'");
    }
    return value;
}

/// Strips one optional markdown code fence (``` or ```lang) around the body.
inline std::string_view strip_code_fence(std::string_view s) {
    s = trim_view(s);
    if (s.size() < 6 || s.substr(0, 3) != "```") return s;
    std::string_view inner = s;
    inner.remove_prefix(3);
    // Optional language tag up to the first newline.
    std::size_t nl = inner.find('\n');
    if (nl == std::string_view::npos) return s;
    inner.remove_prefix(nl + 1);
    if (inner.size() < 3 || inner.substr(inner.size() - 3) != "```") return s;
    inner.remove_suffix(3);
    return trim_view(inner);
}

inline PersonaJudgment parse_persona_judgment(std::string_view raw, PersonaId persona) {
    std::string_view body = strip_code_fence(raw);
    nlohmann::json j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
        throw ParseError(ParseError::Kind::Malformed, "persona output is not a JSON object");
    }
    if (!j.contains("analysis") || !j.contains("score")) {
        throw ParseError(ParseError::Kind::Malformed,
                         "persona JSON must contain 'analysis' and 'score'");
    }
    if (j.size() != 2) {
        throw ParseError(ParseError::Kind::ExtraKeys, "persona JSON carries extra keys");
    }
    if (!j["analysis"].is_string()) {
        throw ParseError(ParseError::Kind::Malformed, "'analysis' must be a string");
    }
    if (!j["score"].is_number_integer()) {
        throw ParseError(ParseError::Kind::NonIntegerScore, "'score' must be an integer");
    }
    auto score = j["score"].get<std::int64_t>();
    if (score < 0 || score > 10) {
        throw ParseError(ParseError::Kind::ScoreRange,
                         "persona score outside [0, 10]: " + std::to_string(score));
    }
    return PersonaJudgment{persona, j["analysis"].get<std::string>(), static_cast<int>(score)};
}

// ---------------------------------------------------------------------------
// Disk cache
// ---------------------------------------------------------------------------

/// Write-through response cache: one JSON file per request digest, laid out as
/// cache_dir/<first two hex chars>/<digest>.json. Reads need no lock; writes
/// are serialized and go through a temp file + rename.
class DiskCache {
public:
    explicit DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const { return dir_; }

    std::filesystem::path path_for(const CacheKey& key) const {
        return dir_ / key.digest.substr(0, 2) / (key.digest + ".json");
    }

    std::optional<nlohmann::json> load(const CacheKey& key) const {
        std::ifstream in(path_for(key));
        if (!in) {
            ++misses_;
            return std::nullopt;
        }
        nlohmann::json entry = nlohmann::json::parse(in, nullptr, false);
        if (entry.is_discarded()) {
            ++misses_;
            return std::nullopt;
        }
        ++hits_;
        return entry;
    }

    std::uint64_t hits() const { return hits_.load(); }
    std::uint64_t misses() const { return misses_.load(); }

    void store(const CacheKey& key, const nlohmann::json& entry) {
        std::scoped_lock lock(write_mutex_);
        auto path = path_for(key);
        std::filesystem::create_directories(path.parent_path());
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp);
            if (!out) throw IoError("cannot write cache entry: " + tmp.string());
            out << entry.dump(2) << '\n';
        }
        std::filesystem::rename(tmp, path);
    }

private:
    std::filesystem::path dir_;
    std::mutex write_mutex_;
    mutable std::atomic<std::uint64_t> hits_{0};
    mutable std::atomic<std::uint64_t> misses_{0};
};

// ---------------------------------------------------------------------------
// HTTP transport (OpenAI-compatible chat completions)
// ---------------------------------------------------------------------------

/// Splits an endpoint URL into the scheme-host-port prefix httplib wants and
/// the path that precedes "/chat/completions".
inline std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint_url must include a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    return {url.substr(0, path_start), url.substr(path_start)};
}

/// One chat-completion round trip. Throws GatewayError(Transport) on any
/// connection, status, or response-shape problem.
inline std::string http_chat_complete(const GatewayConfig& config, const std::string& api_key,
                                      const nlohmann::json& body) {
    auto [host, prefix] = split_endpoint(config.endpoint_url);
    std::string path = prefix;
    static constexpr std::string_view kSuffix = "/chat/completions";
    if (path.size() < kSuffix.size() ||
        path.compare(path.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0) {
        path += kSuffix;
    }
    httplib::Client client(host);
    client.set_connection_timeout(30, 0);
    client.set_read_timeout(300, 0);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key}};
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw GatewayError(GatewayError::Kind::Transport,
                           "connection to " + host + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw GatewayError(GatewayError::Kind::Transport,
                           "endpoint returned HTTP " + std::to_string(res->status));
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() ||
        reply["choices"].empty() || !reply["choices"][0].contains("message") ||
        !reply["choices"][0]["message"].contains("content")) {
        throw GatewayError(GatewayError::Kind::Transport, "malformed chat-completion response");
    }
    return reply["choices"][0]["message"]["content"].get<std::string>();
}

using ChatTransport = std::function<std::string(const nlohmann::json& request_body)>;

inline nlohmann::json build_request_body(const GatewayConfig& config,
                                         const std::vector<ChatMessage>& messages,
                                         double temperature) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) {
        msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    return nlohmann::json{
        {"model", config.model_name}, {"messages", std::move(msgs)}, {"temperature", temperature}};
}

inline std::string iso8601_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Cache-first scoring. On a warm cache this performs zero network calls; on
/// a miss it calls the endpoint with up to max_retries retries (exponential
/// backoff), re-sampling on parse failures, and writes the raw response plus
/// parsed value through to disk.
template <typename Parser>
auto score_cached(const CacheKey& key, const std::vector<ChatMessage>& messages,
                  const GatewayConfig& config, DiskCache& cache, Parser&& parser,
                  const ChatTransport& transport = {}) {
    if (auto entry = cache.load(key)) {
        if (entry->contains("raw_response") && (*entry)["raw_response"].is_string()) {
            try {
                return parser((*entry)["raw_response"].template get<std::string>());
            } catch (const ParseError&) {
                // Entry predates a parser fix; fall through and re-fetch.
            }
        }
    }
    if (config.offline) {
        throw GatewayError(GatewayError::Kind::Transport,
                           "offline mode with cold cache for digest " + key.digest);
    }
    const char* api_key = std::getenv(config.api_key_env.c_str());
    if (api_key == nullptr || *api_key == '\0') {
        throw GatewayError(GatewayError::Kind::Auth,
                           "environment variable " + config.api_key_env +
                               " is unset and cache misses");
    }
    ChatTransport send = transport;
    if (!send) {
        send = [&config, api_key](const nlohmann::json& body) {
            return http_chat_complete(config, api_key, body);
        };
    }
    std::string last_error;
    for (unsigned attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(config.backoff_ms << (attempt - 1)));
        }
        double temperature = attempt == 0 ? config.temperature : config.retry_temperature;
        nlohmann::json body = build_request_body(config, messages, temperature);
        try {
            std::string raw = send(body);
            auto parsed = parser(raw);
            nlohmann::json entry{{"request", body},
                                 {"raw_response", raw},
                                 {"parsed", parsed},
                                 {"timestamp", iso8601_now()}};
            cache.store(key, entry);
            return parsed;
        } catch (const GatewayError& e) {
            if (e.kind() == GatewayError::Kind::Auth) throw;
            last_error = e.what();
        } catch (const ParseError& e) {
            last_error = e.what();
        }
    }
    throw GatewayError(GatewayError::Kind::ExhaustedRetries,
                       "retries exhausted for digest " + key.digest + ": " + last_error);
}

// ---------------------------------------------------------------------------
// High-level fetchers
// ---------------------------------------------------------------------------

inline std::string judge_template_revision(const JudgeRubric& rubric) {
    std::string payload = rubric.prompt_template;
    payload.push_back('\x1f');
    payload.append(k_judge_user_template);
    return sha256_hex(payload);
}

inline std::string persona_template_revision(PersonaId persona) {
    std::string payload(k_persona_system_template);
    payload.push_back('\x1f');
    payload.append(k_persona_user_template);
    payload.push_back('\x1f');
    payload.append(persona_bio(persona));
    return sha256_hex(payload);
}

inline double fetch_judge_score(const JudgeRubric& rubric, const DatasetRecord& record,
                                const GatewayConfig& config, DiskCache& cache,
                                const ChatTransport& transport = {}) {
    auto key = CacheKey::make(config.model_name, rubric.version_tag, record.record_id,
                              judge_template_revision(rubric));
    auto messages = render_judge_messages(rubric, record);
    return score_cached(key, messages, config, cache,
                        [](const std::string& raw) { return parse_judge_score(raw); }, transport);
}

inline PersonaJudgment fetch_persona_judgment(PersonaId persona, const DatasetRecord& record,
                                              const GatewayConfig& config, DiskCache& cache,
                                              const ChatTransport& transport = {}) {
    auto key = CacheKey::make(config.model_name, persona_name(persona), record.record_id,
                              persona_template_revision(persona));
    auto messages = render_persona_messages(persona, record);
    return score_cached(
        key, messages, config, cache,
        [persona](const std::string& raw) { return parse_persona_judgment(raw, persona); },
        transport);
}

/// Runs body(0..n-1) on up to max_parallel worker threads. The body must do
/// its own error capture; exceptions escaping a worker terminate the process.
inline void parallel_for(std::size_t n, unsigned max_parallel,
                         const std::function<void(std::size_t)>& body) {
    unsigned workers = std::max(1u, std::min<unsigned>(max_parallel, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace judgeagg
