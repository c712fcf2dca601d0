#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "judgeagg/core.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/gateway.hpp"

namespace judgeagg {

struct IngestOptions {
    std::optional<std::size_t> limit;
    int answer_index = 0;  // which completion to keep when a row offers several
};

struct IngestResult {
    std::vector<DatasetRecord> records;
    std::size_t skipped = 0;
};

/// Line-delimited JSON with fields `prompt`, `answer` (or a `completions`
/// array), and an optional `overall_score`. Invalid rows are skipped and
/// counted, record ids are content hashes salted with the row index so
/// duplicate rows stay distinct, and parsing stops once `limit` valid records
/// are collected.
inline IngestResult ingest_ultrafeedback(const std::filesystem::path& path,
                                         const IngestOptions& options = {}) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot read dataset file: " + path.string());
    IngestResult result;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        const std::size_t row_index = row++;
        if (options.limit && result.records.size() >= *options.limit) break;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ++result.skipped;
            continue;
        }
        DatasetRecord record;
        if (j.contains("prompt") && j["prompt"].is_string()) {
            record.prompt = j["prompt"].get<std::string>();
        }
        if (j.contains("answer") && j["answer"].is_string()) {
            record.answer = j["answer"].get<std::string>();
        } else if (j.contains("completions") && j["completions"].is_array()) {
            const auto& completions = j["completions"];
            const auto idx = static_cast<std::size_t>(std::max(0, options.answer_index));
            if (idx < completions.size() && completions[idx].is_string()) {
                record.answer = completions[idx].get<std::string>();
            }
        }
        if (j.contains("overall_score") && j["overall_score"].is_number()) {
            record.external_label = j["overall_score"].get<double>();
        }
        std::string payload = record.prompt;
        payload.push_back('\x1f');
        payload.append(record.answer);
        payload.push_back('\x1f');
        payload.append(std::to_string(row_index));
        record.record_id = sha256_hex(payload).substr(0, 16);
        if (!validate_record(record).empty()) {
            ++result.skipped;
            continue;
        }
        result.records.push_back(std::move(record));
    }
    if (result.records.empty()) {
        throw IngestError("no valid records in " + path.string() + " (" +
                          std::to_string(result.skipped) + " skipped)");
    }
    return result;
}

}  // namespace judgeagg
