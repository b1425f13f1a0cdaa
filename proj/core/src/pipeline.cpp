#include "qaguide/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "qaguide/error.hpp"
#include "qaguide/records.hpp"
#include "qaguide/reward.hpp"
#include "qaguide/significance.hpp"
#include "qaguide/text.hpp"

namespace qaguide {

using nlohmann::json;
namespace fs = std::filesystem;

TokenCounter CounterConfig::make() const {
  if (kind == "whitespace") return TokenCounter::whitespace();
  if (kind == "bytes") return TokenCounter::byte_ratio(bytes_per_token);
  throw Error(ErrorKind::kValidation, "unknown counter kind '" + kind + "'");
}

namespace {

const std::set<std::string> kConfigKeys = {
    "books",       "tasks",          "output_dir",       "corpus_style",     "strategy",
    "strategies",  "mode",           "trace_format",     "backends",         "seeds",
    "counter",     "prompts_dir",    "thinking_markers", "nli_chunk_tokens", "task_parallelism",
    "temperature", "max_new_tokens", "bm25"};

const std::set<std::string> kRoles = {kRoleReasoner, kRoleGenerator, kRoleJudge, kRoleChecker,
                                      kRoleAnswerer};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

ContextSpec spec_from_json(const json& j) {
  ContextSpec s;
  if (j.is_string()) {
    s.kind = parse_context_kind(j.get<std::string>());
  } else if (j.is_object()) {
    s.kind = parse_context_kind(j.at("kind").get<std::string>());
    s.context_budget_tokens = j.value("context_budget_tokens", s.context_budget_tokens);
    s.retrieval_chunk_tokens = j.value("retrieval_chunk_tokens", s.retrieval_chunk_tokens);
    s.process_chunk_tokens = j.value("process_chunk_tokens", s.process_chunk_tokens);
  } else {
    throw Error(ErrorKind::kValidation, "strategy must be a name or an object");
  }
  s.validate();
  return s;
}

json spec_to_json(const ContextSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"context_budget_tokens", s.context_budget_tokens},
          {"retrieval_chunk_tokens", s.retrieval_chunk_tokens},
          {"process_chunk_tokens", s.process_chunk_tokens}};
}

std::string style_name(CorpusStyle s) {
  switch (s) {
    case CorpusStyle::kBookWorm: return "bookworm";
    case CorpusStyle::kCroSS: return "cross";
    case CorpusStyle::kGeneric: break;
  }
  return "generic";
}

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(ErrorKind::kValidation, std::string(what) + " path is not set");
  if (!fs::is_regular_file(p)) {
    throw Error(ErrorKind::kValidation, std::string(what) + " file not found: " + p.string());
  }
}

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto count = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (count <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

PromptTemplates load_prompts(const RunConfig& c) {
  return c.prompts_dir ? PromptTemplates::load(*c.prompts_dir) : PromptTemplates::defaults();
}

std::string backend_label(const BackendPtr& b) { return b ? b->id() : std::string(); }

}  // namespace

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kValidation, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kValidation, "config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::kValidation, "config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kConfigKeys.count(key)) throw Error(ErrorKind::kValidation, "unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    if (j.contains("books")) c.books = resolve(base_dir, j["books"].get<std::string>());
    if (j.contains("tasks")) c.tasks = resolve(base_dir, j["tasks"].get<std::string>());
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    if (j.contains("corpus_style")) c.corpus_style = parse_corpus_style(j["corpus_style"].get<std::string>());
    if (j.contains("strategy") && j.contains("strategies")) {
      throw Error(ErrorKind::kValidation, "give either 'strategy' or 'strategies', not both");
    }
    if (j.contains("strategy")) c.strategies.push_back(spec_from_json(j["strategy"]));
    if (j.contains("strategies")) {
      for (const auto& s : j["strategies"]) c.strategies.push_back(spec_from_json(s));
    }
    if (c.strategies.empty()) c.strategies.push_back(ContextSpec{});
    if (j.contains("mode")) c.mode = parse_reasoning_mode(j["mode"].get<std::string>());
    if (auto it = j.find("trace_format"); it != j.end()) {
      c.trace_format.include_explanation = it->value("explanation", true);
      c.trace_format.include_type = it->value("type", true);
      c.trace_format.include_answer = it->value("answer", true);
    }
    if (auto it = j.find("backends"); it != j.end()) {
      for (const auto& [role, cfg] : it->items()) {
        if (!kRoles.count(role)) throw Error(ErrorKind::kValidation, "unknown backend role '" + role + "'");
        c.backends[role] = backend_config_from_json(cfg, base_dir);
      }
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::int64_t>>();
    if (auto it = j.find("counter"); it != j.end()) {
      c.counter.kind = it->value("kind", c.counter.kind);
      c.counter.bytes_per_token = it->value("bytes_per_token", c.counter.bytes_per_token);
    }
    if (j.contains("prompts_dir")) c.prompts_dir = resolve(base_dir, j["prompts_dir"].get<std::string>());
    if (auto it = j.find("thinking_markers"); it != j.end()) {
      c.open_marker = it->value("open", c.open_marker);
      c.close_marker = it->value("close", c.close_marker);
    }
    c.nli_chunk_tokens = j.value("nli_chunk_tokens", c.nli_chunk_tokens);
    c.task_parallelism = j.value("task_parallelism", c.task_parallelism);
    c.temperature = j.value("temperature", c.temperature);
    c.max_new_tokens = j.value("max_new_tokens", c.max_new_tokens);
    if (auto it = j.find("bm25"); it != j.end()) {
      c.bm25.k1 = it->value("k1", c.bm25.k1);
      c.bm25.b = it->value("b", c.bm25.b);
      c.bm25.validate();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kValidation, std::string("config: ") + e.what());
  }
  c.counter.make();
  return c;
}

namespace {

void validate_common(const RunConfig& c) {
  require_file(c.books, "books");
  require_file(c.tasks, "tasks");
  if (c.seeds.empty()) throw Error(ErrorKind::kValidation, "at least one seed is required");
  if (std::set<std::int64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    throw Error(ErrorKind::kValidation, "seeds must be distinct");
  }
  if (c.task_parallelism < 1) throw Error(ErrorKind::kValidation, "task_parallelism must be >= 1");
  if (c.nli_chunk_tokens == 0) throw Error(ErrorKind::kValidation, "nli_chunk_tokens must be positive");
  if (c.open_marker.empty() || c.close_marker.empty() || c.open_marker == c.close_marker) {
    throw Error(ErrorKind::kValidation, "thinking markers must be non-empty and distinct");
  }
  if (c.prompts_dir && !fs::is_directory(*c.prompts_dir)) {
    throw Error(ErrorKind::kValidation, "prompts_dir not found: " + c.prompts_dir->string());
  }
  c.counter.make();
  for (const auto& [role, b] : c.backends) b.validate();
}

}  // namespace

void RunConfig::validate_for_run() const {
  validate_common(*this);
  if (output_dir.empty()) throw Error(ErrorKind::kValidation, "output_dir is not set");
  for (const auto& s : strategies) s.validate();
  if (!backends.count(kRoleGenerator)) throw Error(ErrorKind::kValidation, "no generator backend configured");
  if (mode == ReasoningMode::kGuidedQa && !backends.count(kRoleReasoner)) {
    throw Error(ErrorKind::kValidation, "guided_qa mode requires a reasoner backend");
  }
  if (temperature < 0.0) throw Error(ErrorKind::kValidation, "temperature must be >= 0");
  if (max_new_tokens < 1) throw Error(ErrorKind::kValidation, "max_new_tokens must be >= 1");
}

void RunConfig::validate_for_evaluate() const { validate_common(*this); }

json RunConfig::to_json() const {
  json strategies_json = json::array();
  for (const auto& s : strategies) strategies_json.push_back(spec_to_json(s));
  json backends_json = json::object();
  for (const auto& [role, b] : backends) backends_json[role] = qaguide::to_json(b);
  json seeds_json = seeds;
  json j = {{"books", books.string()},
            {"tasks", tasks.string()},
            {"output_dir", output_dir.string()},
            {"corpus_style", style_name(corpus_style)},
            {"strategies", strategies_json},
            {"mode", to_string(mode)},
            {"trace_format", {{"explanation", trace_format.include_explanation},
                              {"type", trace_format.include_type},
                              {"answer", trace_format.include_answer}}},
            {"backends", backends_json},
            {"seeds", seeds_json},
            {"counter", {{"kind", counter.kind}, {"bytes_per_token", counter.bytes_per_token}}},
            {"thinking_markers", {{"open", open_marker}, {"close", close_marker}}},
            {"nli_chunk_tokens", nli_chunk_tokens},
            {"task_parallelism", task_parallelism},
            {"temperature", temperature},
            {"max_new_tokens", max_new_tokens},
            {"bm25", {{"k1", bm25.k1}, {"b", bm25.b}}}};
  if (prompts_dir) j["prompts_dir"] = prompts_dir->string();
  return j;
}

std::string RunConfig::hash() const {
  auto j = to_json();
  // Parallelism does not change results, so it stays out of the identity.
  j.erase("task_parallelism");
  return hex64(text::fnv1a64(j.dump()));
}

RoleBackends RoleBackends::from_config(const RunConfig& config) {
  RoleBackends r;
  auto make = [&](const char* role) -> BackendPtr {
    auto it = config.backends.find(role);
    return it == config.backends.end() ? nullptr : make_backend(it->second);
  };
  r.reasoner = make(kRoleReasoner);
  r.generator = make(kRoleGenerator);
  r.judge = make(kRoleJudge);
  r.checker = make(kRoleChecker);
  r.answerer = make(kRoleAnswerer);
  return r;
}

fs::path seed_dir(const fs::path& output_dir, std::int64_t seed) {
  return output_dir / ("seed-" + std::to_string(seed));
}

std::string task_file_name(std::string_view strategy_label, ReasoningMode mode,
                           std::string_view task_id) {
  std::string safe;
  bool changed = false;
  for (char c : task_id) {
    if (text::is_ascii_alnum(c) || c == '-' || c == '_' || c == '.') {
      safe.push_back(c);
    } else {
      safe.push_back('_');
      changed = true;
    }
  }
  if (safe.empty() || safe.front() == '.') changed = true;
  if (changed) safe += "-" + hex64(text::fnv1a64(task_id)).substr(0, 8);
  return std::string(strategy_label) + "__" + std::string(to_string(mode)) + "__" + safe + ".json";
}

namespace {

struct Job {
  std::int64_t seed;
  const ContextSpec* spec;
  const CharacterTask* task;
  fs::path file;
};

struct JobOutcome {
  enum class State { kPending, kDone, kSkipped, kFailed } state = State::kPending;
  std::string error;
};

void aggregate_seed(const fs::path& dir, const std::vector<const Job*>& jobs,
                    const std::vector<const JobOutcome*>& outcomes) {
  std::vector<json> descriptions;
  std::vector<json> traces;
  std::string warnings;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = *jobs[i];
    const std::string where = job.spec->label() + "\t" + job.task->task_id + "\t";
    if (!fs::exists(job.file)) {
      warnings += "ERROR\t" + where + outcomes[i]->error + "\n";
      continue;
    }
    auto record = records::read_json(job.file);
    auto d = records::description_from_record(record);
    for (const auto& w : d.warnings) warnings += "WARN\t" + where + w + "\n";
    if (d.trace) {
      auto t = records::trace_record(d.task_id, *d.trace);
      t["strategy"] = d.strategy;
      t["mode"] = to_string(d.mode);
      t["seed"] = job.seed;
      traces.push_back(std::move(t));
    }
    record.erase("trace");
    descriptions.push_back(std::move(record));
  }
  records::write_jsonl(dir / "descriptions.jsonl", descriptions);
  records::write_jsonl(dir / "traces.jsonl", traces);
  records::write_text_atomic(dir / "warnings.log", warnings);
}

}  // namespace

RunSummary run(const RunConfig& config, const RoleBackends& backends, const RunOptions& options) {
  config.validate_for_run();
  const auto books = load_books(config.books);
  const auto tasks = load_tasks(config.tasks, config.corpus_style);
  dataset_stats(books, tasks);  // rejects tasks that reference unknown books
  if (!backends.generator) throw Error(ErrorKind::kValidation, "generator backend missing");
  if (config.mode == ReasoningMode::kGuidedQa && !backends.reasoner) {
    throw Error(ErrorKind::kValidation, "reasoner backend missing");
  }
  const auto prompts = load_prompts(config);
  const auto counter = config.counter.make();

  fs::create_directories(config.output_dir);
  json manifest = {{"config_hash", config.hash()},
                   {"config", config.to_json()},
                   {"started_at", utc_now()},
                   {"backends", {{kRoleReasoner, backend_label(backends.reasoner)},
                                 {kRoleGenerator, backend_label(backends.generator)},
                                 {kRoleJudge, backend_label(backends.judge)},
                                 {kRoleChecker, backend_label(backends.checker)},
                                 {kRoleAnswerer, backend_label(backends.answerer)}}}};
  const auto manifest_path = config.output_dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    auto previous = records::read_json(manifest_path);
    if (previous.value("config_hash", "") != config.hash() && !options.force) {
      throw Error(ErrorKind::kValidation,
                  "output_dir holds a run with a different config; use --force or a new directory");
    }
  }
  records::write_json(manifest_path, manifest);

  std::vector<Job> jobs;
  for (auto seed : config.seeds) {
    const auto tasks_dir = seed_dir(config.output_dir, seed) / "tasks";
    fs::create_directories(tasks_dir);
    for (const auto& spec : config.strategies) {
      for (const auto& task : tasks) {
        jobs.push_back({seed, &spec, &task, tasks_dir / task_file_name(spec.label(), config.mode, task.task_id)});
      }
    }
  }

  std::vector<JobOutcome> outcomes(jobs.size());
  parallel_for(jobs.size(), config.task_parallelism, [&](std::size_t i) {
    const auto& job = jobs[i];
    auto& out = outcomes[i];
    if (!options.force && fs::exists(job.file)) {
      out.state = JobOutcome::State::kSkipped;
      return;
    }
    std::error_code ec;
    fs::remove(job.file, ec);
    try {
      PipelineContext ctx;
      ctx.generator = backends.generator;
      ctx.reasoner = backends.reasoner;
      ctx.trace_format = config.trace_format;
      ctx.counter = counter;
      ctx.prompts = prompts;
      ctx.open_marker = config.open_marker;
      ctx.close_marker = config.close_marker;
      ctx.bm25 = config.bm25;
      ctx.seed = job.seed;
      ctx.temperature = config.temperature;
      ctx.max_new_tokens = config.max_new_tokens;
      const auto& book = find_book(books, job.task->book_id);
      auto d = run_strategy(*job.task, book, *job.spec, config.mode, ctx);
      records::write_json(job.file, records::description_record(d, job.seed));
      out.state = JobOutcome::State::kDone;
    } catch (const std::exception& e) {
      out.state = JobOutcome::State::kFailed;
      out.error = e.what();
    }
  });

  RunSummary summary;
  for (auto seed : config.seeds) {
    std::vector<const Job*> seed_jobs;
    std::vector<const JobOutcome*> seed_outcomes;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].seed != seed) continue;
      seed_jobs.push_back(&jobs[i]);
      seed_outcomes.push_back(&outcomes[i]);
    }
    aggregate_seed(seed_dir(config.output_dir, seed), seed_jobs, seed_outcomes);
    summary.seed_dirs.push_back(seed_dir(config.output_dir, seed));
  }
  for (const auto& o : outcomes) {
    switch (o.state) {
      case JobOutcome::State::kDone: ++summary.completed; break;
      case JobOutcome::State::kSkipped: ++summary.skipped; break;
      case JobOutcome::State::kFailed: ++summary.failed; break;
      case JobOutcome::State::kPending: break;
    }
  }
  manifest["finished_at"] = utc_now();
  manifest["completed"] = summary.completed;
  manifest["skipped"] = summary.skipped;
  manifest["failed"] = summary.failed;
  records::write_json(manifest_path, manifest);
  return summary;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

std::vector<std::pair<std::int64_t, fs::path>> completed_seeds(const fs::path& run_dir,
                                                               const char* required_file) {
  std::vector<std::pair<std::int64_t, fs::path>> out;
  if (!fs::is_directory(run_dir)) return out;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("seed-", 0) != 0) continue;
    if (!fs::exists(entry.path() / required_file)) continue;
    try {
      std::size_t used = 0;
      auto seed = std::stoll(name.substr(5), &used);
      if (used == name.size() - 5) out.emplace_back(seed, entry.path());
    } catch (const std::exception&) {
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Reference QA pairs per task, extracted once and cached in the run dir.
std::map<std::string, QaReference> reference_qas(const fs::path& run_dir,
                                                 const std::vector<CharacterTask>& tasks,
                                                 const BackendPtr& judge, const PromptTemplates& prompts,
                                                 int parallelism, std::vector<std::string>& notices) {
  std::map<std::string, QaReference> refs;
  const auto cache = run_dir / "reference_qa.jsonl";
  if (fs::exists(cache)) {
    for (const auto& row : records::read_jsonl(cache)) {
      QaReference r;
      r.source_task_id = row.at("task_id").get<std::string>();
      r.items = records::qa_pairs_from_json(row.at("items"));
      refs[r.source_task_id] = std::move(r);
    }
  }
  if (!judge) return refs;

  std::vector<const CharacterTask*> todo;
  for (const auto& t : tasks) {
    if (t.gold_description && !refs.count(t.task_id)) todo.push_back(&t);
  }
  if (todo.empty()) return refs;

  std::vector<std::optional<QaReference>> found(todo.size());
  std::vector<std::string> errors(todo.size());
  parallel_for(todo.size(), parallelism, [&](std::size_t i) {
    try {
      auto r = extract_reference_qa(*todo[i]->gold_description, *judge, todo[i]->character, prompts);
      r.source_task_id = todo[i]->task_id;
      found[i] = std::move(r);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (found[i]) {
      refs[todo[i]->task_id] = std::move(*found[i]);
    } else {
      notices.push_back("task " + todo[i]->task_id + ": no reference QA (" + errors[i] + ")");
    }
  }
  std::vector<json> rows;
  for (const auto& [id, r] : refs) rows.push_back({{"task_id", id}, {"items", records::qa_items_json(r.items)}});
  records::write_jsonl(cache, rows);
  return refs;
}

using GroupKey = std::pair<std::string, std::string>;  // (strategy, mode)

struct GroupScores {
  // column -> seed -> task -> value
  std::array<std::map<std::int64_t, std::map<std::string, double>>, 5> values;
  std::map<std::int64_t, std::vector<TextStats>> stats;
};

std::map<GroupKey, GroupScores> load_group_scores(const fs::path& run_dir) {
  std::map<GroupKey, GroupScores> groups;
  for (const auto& [seed, dir] : completed_seeds(run_dir, "report.jsonl")) {
    for (const auto& row : records::read_jsonl(dir / "report.jsonl")) {
      GroupKey key{row.value("strategy", ""), row.value("mode", "")};
      auto report = records::metric_from_record(row);
      auto& g = groups[key];
      auto values = headline_values(report);
      for (std::size_t c = 0; c < values.size(); ++c) {
        if (values[c]) g.values[c][seed][report.task_id] = *values[c];
      }
      g.stats[seed].push_back(report.stats);
    }
  }
  return groups;
}

std::optional<double> mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Per-task value averaged over seeds.
std::map<std::string, double> task_means(const std::map<std::int64_t, std::map<std::string, double>>& by_seed) {
  std::map<std::string, std::vector<double>> acc;
  for (const auto& [seed, tasks] : by_seed) {
    for (const auto& [task, v] : tasks) acc[task].push_back(v);
  }
  std::map<std::string, double> out;
  for (const auto& [task, v] : acc) out[task] = *mean(v);
  return out;
}

}  // namespace

json summarize_reports(const fs::path& run_dir, const std::optional<fs::path>& baseline_dir,
                       std::size_t permutations, std::uint64_t significance_seed) {
  auto groups = load_group_scores(run_dir);
  if (groups.empty()) throw Error(ErrorKind::kValidation, "no report.jsonl found under " + run_dir.string());
  std::map<GroupKey, GroupScores> baseline;
  if (baseline_dir) {
    baseline = load_group_scores(*baseline_dir);
    if (baseline.empty()) {
      throw Error(ErrorKind::kValidation, "baseline has no report.jsonl: " + baseline_dir->string());
    }
  }

  json columns = json::array();
  for (auto c : kMetricColumns) columns.push_back(c);
  json out = {{"columns", columns},
              {"alpha", kSignificanceAlpha},
              {"baseline", baseline_dir ? json(baseline_dir->string()) : json(nullptr)},
              {"groups", json::array()}};

  for (const auto& [key, g] : groups) {
    json group = {{"strategy", key.first}, {"mode", key.second}};
    std::set<std::int64_t> seeds;
    for (const auto& [seed, _] : g.stats) seeds.insert(seed);

    json per_seed = json::object();
    for (auto seed : seeds) {
      json row = json::object();
      for (std::size_t c = 0; c < kMetricColumns.size(); ++c) {
        std::vector<double> v;
        if (auto it = g.values[c].find(seed); it != g.values[c].end()) {
          for (const auto& [task, x] : it->second) v.push_back(x);
        }
        row[std::string(kMetricColumns[c])] = opt_json(mean(v));
      }
      std::vector<double> tok;
      std::vector<double> uni;
      for (const auto& s : g.stats.at(seed)) {
        tok.push_back(static_cast<double>(s.tokens));
        uni.push_back(s.unique_unigram_pct);
      }
      row["tokens"] = opt_json(mean(tok));
      row["unique_unigram_pct"] = opt_json(mean(uni));
      row["n"] = g.stats.at(seed).size();
      per_seed[std::to_string(seed)] = row;
    }
    group["per_seed"] = per_seed;

    // Cross-seed mean is the mean of per-seed means.
    json cross = json::object();
    for (const auto& name : {std::string("PRISMA"), std::string("QA"), std::string("NLI"),
                             std::string("EntMent"), std::string("Rouge-L"), std::string("tokens"),
                             std::string("unique_unigram_pct")}) {
      std::vector<double> v;
      for (const auto& [seed, row] : per_seed.items()) {
        if (!row[name].is_null()) v.push_back(row[name].get<double>());
      }
      cross[name] = opt_json(mean(v));
    }
    group["mean"] = cross;
    group["seeds"] = seeds;

    if (baseline_dir) {
      const GroupScores* base = nullptr;
      std::string base_label;
      for (const auto& [bkey, bg] : baseline) {
        if (bkey.first == key.first) {
          base = &bg;
          base_label = bkey.first + "/" + bkey.second;
          break;
        }
      }
      if (!base && baseline.size() == 1) {
        base = &baseline.begin()->second;
        base_label = baseline.begin()->first.first + "/" + baseline.begin()->first.second;
      }
      json sig = json::object();
      for (std::size_t c = 0; c < kMetricColumns.size(); ++c) {
        const std::string name(kMetricColumns[c]);
        if (!base) {
          sig[name] = nullptr;
          continue;
        }
        auto a = task_means(g.values[c]);
        auto b = task_means(base->values[c]);
        std::vector<double> va;
        std::vector<double> vb;
        for (const auto& [task, x] : a) {
          if (auto it = b.find(task); it != b.end()) {
            va.push_back(x);
            vb.push_back(it->second);
          }
        }
        if (va.empty()) {
          sig[name] = nullptr;
          continue;
        }
        auto r = significance_test(va, vb, permutations, significance_seed);
        sig[name] = {{"p_value", r.p_value},
                     {"observed_diff", r.observed_diff},
                     {"n_pairs", va.size()},
                     {"significant", is_significant(r)},
                     {"improved", *mean(va) > *mean(vb)}};
      }
      group["baseline_group"] = base ? json(base_label) : json(nullptr);
      group["significance"] = sig;
    }
    out["groups"].push_back(group);
  }
  return out;
}

EvaluateSummary evaluate_run(const fs::path& run_dir, const RunConfig& config,
                             const RoleBackends& backends, const EvaluateOptions& options) {
  config.validate_for_evaluate();
  const auto seeds = completed_seeds(run_dir, "descriptions.jsonl");
  if (seeds.empty()) {
    throw Error(ErrorKind::kValidation, "no completed seed directory under " + run_dir.string());
  }
  const auto books = load_books(config.books);
  const auto tasks = load_tasks(config.tasks, config.corpus_style);
  std::map<std::string, const CharacterTask*> task_by_id;
  for (const auto& t : tasks) task_by_id[t.task_id] = &t;
  const auto prompts = load_prompts(config);

  EvaluateSummary summary;
  const auto refs = reference_qas(run_dir, tasks, backends.judge, prompts, config.task_parallelism,
                                  summary.notices);

  MetricBackends mb{backends.judge, backends.checker, backends.answerer};
  MetricOptions mo;
  mo.nli_chunk_tokens = config.nli_chunk_tokens;
  mo.counter = config.counter.make();
  mo.prompts = prompts;

  std::mutex notice_mutex;
  for (const auto& [seed, dir] : seeds) {
    auto rows = records::read_jsonl(dir / "descriptions.jsonl");
    std::vector<json> out(rows.size());
    parallel_for(rows.size(), config.task_parallelism, [&](std::size_t i) {
      auto d = records::description_from_record(rows[i]);
      auto it = task_by_id.find(d.task_id);
      std::optional<std::string> gold;
      const Book* book = nullptr;
      if (it != task_by_id.end()) {
        gold = it->second->gold_description;
        for (const auto& b : books) {
          if (b.id == it->second->book_id) book = &b;
        }
      } else {
        std::lock_guard lock(notice_mutex);
        summary.notices.push_back("task " + d.task_id + " not in tasks file; reference metrics skipped");
      }
      std::optional<QaReference> ref;
      if (auto r = refs.find(d.task_id); r != refs.end() && !r->second.items.empty()) ref = r->second;
      auto report = evaluate_description(d.task_id, d.text, gold, book, ref, mb, mo);
      auto row = records::metric_record(report);
      row["strategy"] = d.strategy;
      row["mode"] = to_string(d.mode);
      row["seed"] = seed;
      out[i] = std::move(row);
    });
    records::write_jsonl(dir / "report.jsonl", out);
    summary.reports += out.size();
  }

  summary.summary = summarize_reports(run_dir, options.baseline_dir, options.permutations,
                                      options.significance_seed);
  records::write_json(run_dir / "report_summary.json", summary.summary);
  records::write_text_atomic(run_dir / "report.csv", render_report_csv(summary.summary));
  return summary;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string cell(const json& group, const std::string& column) {
  const auto& v = group.at("mean").at(column);
  if (v.is_null()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v.get<double>() * 100.0);
  std::string s = buf;
  if (group.contains("significance")) {
    const auto& sig = group["significance"][column];
    if (sig.is_object() && sig.value("significant", false)) s += "†";
  }
  return s;
}

std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) w += (c & 0xC0) != 0x80;
  return w;
}

}  // namespace

std::string render_report_table(const json& summary) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Strategy", "Mode"};
  for (auto c : kMetricColumns) header.emplace_back(c);
  rows.push_back(header);
  for (const auto& g : summary.at("groups")) {
    std::vector<std::string> row{g.at("strategy").get<std::string>(), g.at("mode").get<std::string>()};
    for (auto c : kMetricColumns) row.push_back(cell(g, std::string(c)));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], display_width(r[i]));
  }
  std::string out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t i = 0; i < rows[k].size(); ++i) {
      const auto pad = width[i] - display_width(rows[k][i]);
      if (i < 2) {
        out += rows[k][i] + std::string(pad, ' ');
      } else {
        out += std::string(pad, ' ') + rows[k][i];
      }
      out += i + 1 < rows[k].size() ? "  " : "\n";
    }
    if (k == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out += std::string(total - 2, '-') + "\n";
    }
  }
  if (!summary.value("baseline", json(nullptr)).is_null()) {
    out += "† p < " + std::to_string(summary.value("alpha", kSignificanceAlpha)).substr(0, 4) +
           " vs baseline " + summary["baseline"].get<std::string>() + "\n";
  }
  return out;
}

std::string render_report_csv(const json& summary) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  std::string out = "strategy,mode";
  for (auto c : kMetricColumns) out += "," + std::string(c);
  out += "\n";
  for (const auto& g : summary.at("groups")) {
    out += quote(g.at("strategy").get<std::string>()) + "," + quote(g.at("mode").get<std::string>());
    for (auto c : kMetricColumns) {
      auto v = cell(g, std::string(c));
      out += "," + (v == "-" ? std::string() : v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace qaguide
