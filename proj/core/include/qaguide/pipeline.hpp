#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaguide/backend_config.hpp"
#include "qaguide/corpus.hpp"
#include "qaguide/metrics.hpp"
#include "qaguide/strategies.hpp"

namespace qaguide {

struct CounterConfig {
  std::string kind = "whitespace";  // whitespace | bytes
  std::size_t bytes_per_token = 4;

  TokenCounter make() const;
};

/// Everything a run needs. Loaded from a JSON config file; relative paths
/// resolve against the config file's directory.
struct RunConfig {
  std::filesystem::path books;
  std::filesystem::path tasks;
  std::filesystem::path output_dir;
  CorpusStyle corpus_style = CorpusStyle::kGeneric;
  std::vector<ContextSpec> strategies;
  ReasoningMode mode = ReasoningMode::kNoTrace;
  TraceFormat trace_format;
  std::map<std::string, BackendConfig> backends;
  std::vector<std::int64_t> seeds{0};
  CounterConfig counter;
  std::optional<std::filesystem::path> prompts_dir;
  std::string open_marker{kDefaultOpenMarker};
  std::string close_marker{kDefaultCloseMarker};
  std::size_t nli_chunk_tokens = kNliChunkTokens;
  int task_parallelism = 1;
  double temperature = kDefaultTemperature;
  int max_new_tokens = 1024;
  Bm25Params bm25;

  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

  /// Throws kValidation on missing files or unconfigured roles.
  void validate_for_run() const;
  void validate_for_evaluate() const;
  /// Effective config with resolved paths; the manifest hash is over its dump.
  nlohmann::json to_json() const;
  std::string hash() const;
};

inline constexpr const char* kRoleReasoner = "reasoner";
inline constexpr const char* kRoleGenerator = "generator";
inline constexpr const char* kRoleJudge = "judge";
inline constexpr const char* kRoleChecker = "checker";
inline constexpr const char* kRoleAnswerer = "answerer";

struct RoleBackends {
  BackendPtr reasoner;
  BackendPtr generator;
  BackendPtr judge;
  BackendPtr checker;
  BackendPtr answerer;

  static RoleBackends from_config(const RunConfig& config);
};

struct RunOptions {
  bool force = false;
};

struct RunSummary {
  std::size_t completed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  std::vector<std::filesystem::path> seed_dirs;
};

std::filesystem::path seed_dir(const std::filesystem::path& output_dir, std::int64_t seed);

/// Per-task result file name: "<strategy>__<mode>__<task_id>.json", with
/// unsafe task-id characters replaced and a hash suffix added when needed.
std::string task_file_name(std::string_view strategy_label, ReasoningMode mode,
                           std::string_view task_id);

/// Runs every (seed, strategy, task). Per-task results are written as they
/// finish, so an interrupted run resumes where it stopped; existing results
/// are skipped unless options.force.
RunSummary run(const RunConfig& config, const RoleBackends& backends,
               const RunOptions& options = {});

struct EvaluateOptions {
  std::optional<std::filesystem::path> baseline_dir;
  std::size_t permutations = 10000;
  std::uint64_t significance_seed = 0;
};

struct EvaluateSummary {
  std::size_t reports = 0;
  std::vector<std::string> notices;
  nlohmann::json summary;
};

/// Scores every description of a run directory, writes per-seed
/// report.jsonl, report_summary.json, and report.csv.
EvaluateSummary evaluate_run(const std::filesystem::path& run_dir, const RunConfig& config,
                             const RoleBackends& backends, const EvaluateOptions& options = {});

/// Aggregates the per-seed report.jsonl files of `run_dir`: per-seed and
/// cross-seed means per (strategy, mode) group, plus paired significance
/// against `baseline_dir` when given.
nlohmann::json summarize_reports(const std::filesystem::path& run_dir,
                                 const std::optional<std::filesystem::path>& baseline_dir,
                                 std::size_t permutations = 10000,
                                 std::uint64_t significance_seed = 0);

/// Table text for a report_summary.json, in PRISMA, QA, NLI, EntMent,
/// Rouge-L column order (values x100, daggers on significant rows).
std::string render_report_table(const nlohmann::json& summary);
std::string render_report_csv(const nlohmann::json& summary);

}  // namespace qaguide
