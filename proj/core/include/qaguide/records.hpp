#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaguide/metrics.hpp"
#include "qaguide/reward.hpp"
#include "qaguide/strategies.hpp"
#include "qaguide/trace.hpp"

// On-disk record formats. Every file is JSON lines unless noted.
namespace qaguide::records {

/// {"task_id", "chunks": [{"index", "items": [{"q","e","a","t"}] | null}]}
nlohmann::json trace_record(std::string_view task_id, const ReasoningTrace& trace);
ReasoningTrace trace_from_record(const nlohmann::json& j);

/// {"task_id", "strategy", "mode", "text", "trace"?, "stats", "warnings", "seed"?}
nlohmann::json description_record(const Description& d, std::optional<std::int64_t> seed);
Description description_from_record(const nlohmann::json& j);

nlohmann::json metric_record(const MetricReport& r);
MetricReport metric_from_record(const nlohmann::json& j);

nlohmann::json qa_items_json(const std::vector<QaPair>& pairs);
std::vector<QaPair> qa_pairs_from_json(const nlohmann::json& j);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
/// Writes through a temporary file and renames, so readers never observe a
/// partial file.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace qaguide::records
