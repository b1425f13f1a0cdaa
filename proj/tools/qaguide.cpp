#include <algorithm>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "qaguide/corpus.hpp"
#include "qaguide/error.hpp"
#include "qaguide/pipeline.hpp"
#include "qaguide/records.hpp"
#include "qaguide/reward_service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kPartial = 2, kFatal = 3 };

bool is_validation(qaguide::ErrorKind k) {
  using qaguide::ErrorKind;
  switch (k) {
    case ErrorKind::kValidation:
    case ErrorKind::kParse:
    case ErrorKind::kSchema:
    case ErrorKind::kDuplicateId:
    case ErrorKind::kDanglingReference:
      return true;
    default:
      return false;
  }
}

std::vector<std::int64_t> parse_seeds(const std::string& s) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw qaguide::Error(qaguide::ErrorKind::kValidation, "bad seed '" + item + "'");
    }
  }
  if (out.empty()) throw qaguide::Error(qaguide::ErrorKind::kValidation, "--seeds is empty");
  return out;
}

// "name[:budget[:chunk]]". For hierarchical/incremental a single number is
// the processing chunk size; otherwise it is the context budget and the
// optional second number the retrieval chunk size.
qaguide::ContextSpec parse_strategy(const std::string& s) {
  qaguide::ContextSpec spec;
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.empty() || parts.size() > 3) {
    throw qaguide::Error(qaguide::ErrorKind::kValidation, "bad strategy '" + s + "'");
  }
  spec.kind = qaguide::parse_context_kind(parts[0]);
  std::vector<std::size_t> sizes;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    try {
      std::size_t used = 0;
      sizes.push_back(std::stoul(parts[i], &used));
      if (used != parts[i].size()) throw std::invalid_argument(parts[i]);
    } catch (const std::exception&) {
      throw qaguide::Error(qaguide::ErrorKind::kValidation, "bad strategy size in '" + s + "'");
    }
  }
  const bool staged = spec.kind == qaguide::ContextKind::kHierarchical ||
                      spec.kind == qaguide::ContextKind::kIncremental;
  if (staged && sizes.size() == 1) {
    spec.process_chunk_tokens = sizes[0];
    spec.context_budget_tokens = std::max(spec.context_budget_tokens, sizes[0]);
  } else if (staged && sizes.size() == 2) {
    spec.context_budget_tokens = sizes[0];
    spec.process_chunk_tokens = sizes[1];
  } else if (!sizes.empty()) {
    spec.context_budget_tokens = sizes[0];
    if (sizes.size() == 2) spec.retrieval_chunk_tokens = sizes[1];
  }
  spec.validate();
  return spec;
}

struct Overrides {
  std::string seeds;
  std::vector<std::string> strategies;
  std::string mode;
  std::string output;
};

qaguide::RunConfig load_config(const std::string& path, const Overrides& o) {
  auto config = qaguide::RunConfig::load(path);
  if (!o.seeds.empty()) config.seeds = parse_seeds(o.seeds);
  if (!o.strategies.empty()) {
    config.strategies.clear();
    for (const auto& s : o.strategies) config.strategies.push_back(parse_strategy(s));
  }
  if (!o.mode.empty()) config.mode = qaguide::parse_reasoning_mode(o.mode);
  if (!o.output.empty()) config.output_dir = o.output;
  return config;
}

void print_summary_table(const json& summary) {
  std::cout << qaguide::render_report_table(summary);
}

int cmd_ingest(const std::string& config_path, const Overrides& o, bool as_json) {
  auto config = load_config(config_path, o);
  auto books = qaguide::load_books(config.books);
  auto tasks = qaguide::load_tasks(config.tasks, config.corpus_style);
  auto stats = qaguide::dataset_stats(books, tasks);
  if (as_json) {
    json j = {{"books", stats.num_books},
              {"books_in_file", books.size()},
              {"samples", stats.num_samples},
              {"avg_characters_per_book", stats.avg_characters_per_book},
              {"avg_input_words", stats.avg_input_words},
              {"avg_output_words", stats.avg_output_words}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("books            %zu (%zu in file)\n", stats.num_books, books.size());
    std::printf("samples          %zu\n", stats.num_samples);
    std::printf("chars per book   %.2f\n", stats.avg_characters_per_book);
    std::printf("avg input words  %.1f\n", stats.avg_input_words);
    std::printf("avg output words %.1f\n", stats.avg_output_words);
  }
  return kOk;
}

int cmd_run(const std::string& config_path, const Overrides& o, bool force) {
  auto config = load_config(config_path, o);
  config.validate_for_run();
  auto backends = qaguide::RoleBackends::from_config(config);
  spdlog::info("run: {} strategies x {} seeds, mode {}, output {}", config.strategies.size(),
               config.seeds.size(), qaguide::to_string(config.mode), config.output_dir.string());
  auto summary = qaguide::run(config, backends, {force});
  spdlog::info("completed {}, skipped {}, failed {}", summary.completed, summary.skipped, summary.failed);
  if (summary.failed > 0) {
    spdlog::warn("some tasks failed; see warnings.log in each seed directory");
    return kPartial;
  }
  return kOk;
}

int cmd_evaluate(const std::string& config_path, const Overrides& o, const std::string& run_dir,
                 const std::string& baseline, std::size_t permutations, std::uint64_t sig_seed) {
  auto config = load_config(config_path, o);
  config.validate_for_evaluate();
  auto backends = qaguide::RoleBackends::from_config(config);
  qaguide::EvaluateOptions options;
  if (!baseline.empty()) options.baseline_dir = fs::path(baseline);
  options.permutations = permutations;
  options.significance_seed = sig_seed;
  const fs::path dir = run_dir.empty() ? config.output_dir : fs::path(run_dir);
  auto summary = qaguide::evaluate_run(dir, config, backends, options);
  for (const auto& n : summary.notices) spdlog::warn("{}", n);
  spdlog::info("scored {} descriptions", summary.reports);
  print_summary_table(summary.summary);
  return kOk;
}

int cmd_report(const std::string& run_dir, bool csv) {
  auto summary = qaguide::records::read_json(fs::path(run_dir) / "report_summary.json");
  std::cout << (csv ? qaguide::render_report_csv(summary) : qaguide::render_report_table(summary));
  return kOk;
}

int cmd_significance(const std::string& run_dir, const std::string& baseline,
                     std::size_t permutations, std::uint64_t sig_seed) {
  auto summary = qaguide::summarize_reports(run_dir, fs::path(baseline), permutations, sig_seed);
  print_summary_table(summary);
  for (const auto& g : summary["groups"]) {
    if (!g.contains("significance")) continue;
    std::cout << g["strategy"].get<std::string>() << "/" << g["mode"].get<std::string>();
    for (const auto& [column, s] : g["significance"].items()) {
      if (s.is_null()) continue;
      std::printf("  %s p=%.4f", column.c_str(), s["p_value"].get<double>());
    }
    std::cout << "\n";
  }
  return kOk;
}

int cmd_reward_serve(const std::string& config_path, const std::string& bind,
                     const std::string& references) {
  auto config = qaguide::RunConfig::load(config_path);
  auto it = config.backends.find(qaguide::kRoleJudge);
  if (it == config.backends.end()) {
    throw qaguide::Error(qaguide::ErrorKind::kValidation, "reward-serve needs a judge backend");
  }
  auto colon = bind.rfind(':');
  if (colon == std::string::npos) {
    throw qaguide::Error(qaguide::ErrorKind::kValidation, "--bind must be host:port");
  }
  const auto host = bind.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw qaguide::Error(qaguide::ErrorKind::kValidation, "bad port in --bind");
  }
  auto store = std::make_shared<qaguide::ReferenceStore>(qaguide::ReferenceStore::load(references));
  auto prompts = config.prompts_dir ? qaguide::PromptTemplates::load(*config.prompts_dir)
                                    : qaguide::PromptTemplates::defaults();
  auto scorer = std::make_shared<qaguide::RewardScorer>(qaguide::make_backend(it->second), store, prompts);

  // Block the stop signals before the server threads exist so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  qaguide::RewardServer server(scorer);
  const int bound = server.start(host, port);
  spdlog::info("reward service on {}:{} with {} references", host, bound, store->size());
  std::printf("listening %s:%d\n", host.c_str(), bound);
  std::fflush(stdout);
  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {}, shutting down", sig);
  server.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("qaguide"));
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");

  CLI::App app{"QA-guided character description pipeline"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  Overrides o;
  std::string config_path;
  auto add_config = [&](CLI::App* sub, bool required = true) {
    auto* opt = sub->add_option("--config", config_path, "run config (JSON)");
    if (required) opt->required()->check(CLI::ExistingFile);
  };
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--seeds", o.seeds, "comma-separated seeds");
    sub->add_option("--strategy", o.strategies, "strategy name[:budget[:chunk]], repeatable");
    sub->add_option("--mode", o.mode, "no_trace | built_in | guided_qa");
  };

  auto* ingest = app.add_subcommand("ingest", "load and validate the corpus, print dataset statistics");
  add_config(ingest);
  bool ingest_json = false;
  ingest->add_flag("--json", ingest_json, "machine-readable output");

  auto* run = app.add_subcommand("run", "generate descriptions for every task and seed");
  add_config(run);
  add_overrides(run);
  bool force = false;
  run->add_flag("--force", force, "recompute tasks that already have results");
  run->add_option("--output", o.output, "override output_dir");

  auto* serve = app.add_subcommand("reward-serve", "serve the QA trace reward over HTTP");
  add_config(serve);
  std::string bind = "127.0.0.1:8088";
  std::string references;
  serve->add_option("--bind", bind, "host:port (port 0 picks a free one)");
  serve->add_option("--references", references, "reference store (JSON lines)")->required()->check(CLI::ExistingFile);

  std::string run_dir;
  std::string baseline;
  std::size_t permutations = 10000;
  std::uint64_t sig_seed = 0;

  auto* evaluate = app.add_subcommand("evaluate", "score a run directory and write reports");
  add_config(evaluate);
  add_overrides(evaluate);
  evaluate->add_option("--run-dir", run_dir, "defaults to the config's output_dir");
  evaluate->add_option("--baseline", baseline, "evaluated run to test against")->check(CLI::ExistingDirectory);
  evaluate->add_option("--permutations", permutations, "randomization test permutations");
  evaluate->add_option("--significance-seed", sig_seed, "randomization test seed");

  auto* report = app.add_subcommand("report", "print the table of an evaluated run");
  report->add_option("--run-dir", run_dir)->required()->check(CLI::ExistingDirectory);
  bool csv = false;
  report->add_flag("--csv", csv, "CSV instead of a text table");

  auto* significance = app.add_subcommand("significance", "paired randomization test against a baseline run");
  significance->add_option("--run-dir", run_dir)->required()->check(CLI::ExistingDirectory);
  significance->add_option("--baseline", baseline)->required()->check(CLI::ExistingDirectory);
  significance->add_option("--permutations", permutations);
  significance->add_option("--seed", sig_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*ingest) return cmd_ingest(config_path, o, ingest_json);
    if (*run) return cmd_run(config_path, o, force);
    if (*serve) return cmd_reward_serve(config_path, bind, references);
    if (*evaluate) return cmd_evaluate(config_path, o, run_dir, baseline, permutations, sig_seed);
    if (*report) return cmd_report(run_dir, csv);
    if (*significance) return cmd_significance(run_dir, baseline, permutations, sig_seed);
  } catch (const qaguide::Error& e) {
    spdlog::error("{}: {}", qaguide::to_string(e.kind()), e.what());
    return is_validation(e.kind()) ? kInvalid : kFatal;
  } catch (const std::exception& e) {
    spdlog::error("fatal: {}", e.what());
    return kFatal;
  }
  return kFatal;
}
