#include <gtest/gtest.h>

#include <map>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "qaguide/error.hpp"
#include "qaguide/pipeline.hpp"
#include "qaguide/records.hpp"

using namespace qaguide;
using namespace qaguide::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// A copy of the end-to-end fixture in a scratch directory.
struct Workspace {
  TempDir dir;
  Workspace() {
    for (const auto& e : fs::directory_iterator(test_data_dir() / "e2e")) {
      fs::copy_file(e.path(), dir.path() / e.path().filename());
    }
  }
  json config_json() const { return json::parse(read_file(dir / "config.json")); }
  RunConfig config(const json& overrides = json::object()) const {
    auto j = config_json();
    j.merge_patch(overrides);
    return RunConfig::from_json(j, dir.path());
  }
};

// Every file under the seed directories, keyed by relative path. The
// manifest carries timestamps and is left out.
std::map<std::string, std::string> snapshot(const fs::path& out) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    files[fs::relative(e.path(), out).string()] = read_file(e.path());
  }
  return files;
}

// Forwards to `inner`, except that every prompt mentioning `needle` fails,
// so the jobs for that character die as a crashed process would leave them.
class FaultyBackend : public Backend {
 public:
  FaultyBackend(BackendPtr inner, std::string needle)
      : Backend(4), inner_(std::move(inner)), needle_(std::move(needle)) {}
  std::string id() const override { return inner_->id(); }

 protected:
  GenerationResult do_generate(const GenerationRequest& r) override {
    if (r.prompt_text().find(needle_) != std::string::npos) {
      throw BackendError(ErrorKind::kTransport, "connection dropped");
    }
    return inner_->generate(r);
  }

 private:
  BackendPtr inner_;
  std::string needle_;
};

}  // namespace

TEST(RunConfig, ParsesFixture) {
  Workspace ws;
  auto c = ws.config();
  EXPECT_EQ(c.strategies.size(), 6u);
  EXPECT_EQ(c.strategies[1].label(), "lead-120");
  EXPECT_EQ(c.strategies[1].retrieval_chunk_tokens, 40u);
  EXPECT_EQ(c.mode, ReasoningMode::kGuidedQa);
  EXPECT_EQ(c.seeds, (std::vector<std::int64_t>{0, 1}));
  EXPECT_EQ(c.books, ws.dir / "books.jsonl");
  EXPECT_EQ(c.output_dir, ws.dir / "out");
  EXPECT_EQ(c.backends.size(), 5u);
  EXPECT_NO_THROW(c.validate_for_run());
  EXPECT_NO_THROW(c.validate_for_evaluate());
}

TEST(RunConfig, DefaultsToBm25) {
  Workspace ws;
  auto j = ws.config_json();
  j.erase("strategies");
  auto c = RunConfig::from_json(j, ws.dir.path());
  ASSERT_EQ(c.strategies.size(), 1u);
  EXPECT_EQ(c.strategies[0].kind, ContextKind::kBm25);
}

TEST(RunConfig, RejectsBadInput) {
  Workspace ws;
  auto bad = [&](const json& patch) {
    auto j = ws.config_json();
    j.merge_patch(patch);
    EXPECT_THROW(RunConfig::from_json(j, ws.dir.path()), Error) << patch.dump();
  };
  bad({{"unknown_key", 1}});
  bad({{"strategy", "bm25"}});
  bad({{"mode", "telepathy"}});
  bad({{"backends", {{"oracle", {{"kind", "mock"}, {"rule", "judge"}}}}}});
  bad({{"backends", {{"generator", {{"kind", "http"}, {"base_url", "http://x/v1"}, {"model_name", "m"}, {"api_key", "k"}}}}}});
  bad({{"strategies", json::array({{{"kind", "lead"}, {"context_budget_tokens", 10}, {"retrieval_chunk_tokens", 40}}})}});
}

TEST(RunConfig, ValidationCatchesMissingPieces) {
  Workspace ws;
  auto c = ws.config();
  c.seeds = {1, 1};
  EXPECT_THROW(c.validate_for_run(), Error);
  c = ws.config();
  c.backends.erase(kRoleReasoner);
  EXPECT_THROW(c.validate_for_run(), Error);
  c.mode = ReasoningMode::kNoTrace;
  EXPECT_NO_THROW(c.validate_for_run());
  c = ws.config();
  c.books = ws.dir / "absent.jsonl";
  EXPECT_THROW(c.validate_for_run(), Error);
  c = ws.config();
  c.close_marker = c.open_marker;
  EXPECT_THROW(c.validate_for_run(), Error);
}

TEST(RunConfig, HashIgnoresParallelismOnly) {
  Workspace ws;
  auto a = ws.config();
  auto b = ws.config({{"task_parallelism", 1}});
  EXPECT_EQ(a.hash(), b.hash());
  auto c = ws.config({{"temperature", 0.7}});
  EXPECT_NE(a.hash(), c.hash());
}

TEST(TaskFileName, SanitizesUnsafeIds) {
  EXPECT_EQ(task_file_name("bm25-120", ReasoningMode::kGuidedQa, "book1-alice"),
            "bm25-120__guided_qa__book1-alice.json");
  auto a = task_file_name("lead-10", ReasoningMode::kNoTrace, "a/b");
  auto b = task_file_name("lead-10", ReasoningMode::kNoTrace, "a b");
  EXPECT_EQ(a.find('/'), std::string::npos);
  EXPECT_NE(a, b);
}

TEST(Run, ProducesEveryTaskAndAggregates) {
  Workspace ws;
  auto config = ws.config();
  auto summary = run(config, RoleBackends::from_config(config));
  EXPECT_EQ(summary.completed, 36u);
  EXPECT_EQ(summary.failed, 0u);
  ASSERT_EQ(summary.seed_dirs.size(), 2u);
  for (const auto& dir : summary.seed_dirs) {
    auto rows = records::read_jsonl(dir / "descriptions.jsonl");
    EXPECT_EQ(rows.size(), 18u);
    for (const auto& r : rows) {
      EXPECT_FALSE(r.contains("trace"));
      EXPECT_FALSE(r["text"].get<std::string>().empty());
    }
    // In guided mode every strategy records a trace; nocontext has an empty one.
    EXPECT_EQ(records::read_jsonl(dir / "traces.jsonl").size(), 18u);
    EXPECT_TRUE(fs::exists(dir / "warnings.log"));
  }
  auto manifest = records::read_json(config.output_dir / "manifest.json");
  EXPECT_EQ(manifest["config_hash"], config.hash());
  EXPECT_EQ(manifest["completed"], 36);
  EXPECT_TRUE(manifest.contains("finished_at"));
}

TEST(Run, RerunIsIdempotentAndMakesNoCalls) {
  Workspace ws;
  auto config = ws.config();
  auto backends = RoleBackends::from_config(config);
  run(config, backends);
  auto before = snapshot(config.output_dir);
  auto gen = std::make_shared<CapturingBackend>(backends.generator);
  auto rea = std::make_shared<CapturingBackend>(backends.reasoner);
  backends.generator = gen;
  backends.reasoner = rea;
  auto again = run(config, backends);
  EXPECT_EQ(again.skipped, 36u);
  EXPECT_EQ(again.completed, 0u);
  EXPECT_EQ(gen->call_count() + rea->call_count(), 0u);
  EXPECT_EQ(snapshot(config.output_dir), before);
  auto forced = run(config, backends, {true});
  EXPECT_EQ(forced.completed, 36u);
  EXPECT_GT(gen->call_count(), 0u);
  EXPECT_EQ(snapshot(config.output_dir), before);
}

TEST(Run, DeterministicAcrossExecutionsAndParallelism) {
  Workspace a, b;
  auto ca = a.config();
  auto cb = b.config({{"task_parallelism", 1}});
  run(ca, RoleBackends::from_config(ca));
  run(cb, RoleBackends::from_config(cb));
  EXPECT_EQ(snapshot(ca.output_dir), snapshot(cb.output_dir));
}

TEST(Run, ResumesAfterCrash) {
  Workspace clean, crashed;
  auto cc = clean.config();
  run(cc, RoleBackends::from_config(cc));

  auto config = crashed.config();
  auto backends = RoleBackends::from_config(config);
  auto healthy = backends;
  backends.generator = std::make_shared<FaultyBackend>(healthy.generator, "character Tobias Holt");
  auto first = run(config, backends);
  EXPECT_EQ(first.failed, 12u);
  EXPECT_EQ(first.completed, 24u);
  auto log = read_file(config.output_dir / "seed-0" / "warnings.log") +
             read_file(config.output_dir / "seed-1" / "warnings.log");
  EXPECT_NE(log.find("ERROR\t"), std::string::npos);
  // A half-written temporary from the interrupted process.
  write_file(config.output_dir / "seed-0" / "tasks" / "bm25-120__guided_qa__kestrel-maren.json.tmp", "{\"trunc");

  auto second = run(config, healthy);
  EXPECT_EQ(second.failed, 0u);
  EXPECT_EQ(second.completed, first.failed);
  EXPECT_EQ(second.skipped, first.completed);
  auto resumed = snapshot(config.output_dir);
  resumed.erase("seed-0/tasks/bm25-120__guided_qa__kestrel-maren.json.tmp");
  EXPECT_EQ(resumed, snapshot(cc.output_dir));
}

TEST(Run, OneDirectoryPerSeed) {
  Workspace ws;
  auto config = ws.config({{"seeds", {3, 5, 7, 11}}, {"strategies", {"nocontext"}}});
  auto s = run(config, RoleBackends::from_config(config));
  EXPECT_EQ(s.seed_dirs.size(), 4u);
  for (int seed : {3, 5, 7, 11}) EXPECT_TRUE(fs::is_directory(seed_dir(config.output_dir, seed)));
}

TEST(Run, RefusesOutputOfDifferentConfig) {
  Workspace ws;
  auto config = ws.config({{"strategies", {"nocontext"}}});
  run(config, RoleBackends::from_config(config));
  auto other = ws.config({{"strategies", {"nocontext"}}, {"temperature", 0.9}});
  EXPECT_THROW(run(other, RoleBackends::from_config(other)), Error);
  EXPECT_NO_THROW(run(other, RoleBackends::from_config(other), {true}));
}

TEST(Evaluate, CandidateEqualsGoldScoresPerfectly) {
  Workspace ws;
  auto config = ws.config();
  auto backends = RoleBackends::from_config(config);
  run(config, backends);
  auto ev = evaluate_run(config.output_dir, config, backends);
  EXPECT_EQ(ev.reports, 36u);
  const auto& summary = ev.summary;
  EXPECT_EQ(summary["columns"], json({"PRISMA", "QA", "NLI", "EntMent", "Rouge-L"}));
  ASSERT_EQ(summary["groups"].size(), 6u);
  for (const auto& g : summary["groups"]) {
    EXPECT_DOUBLE_EQ(g["mean"]["Rouge-L"].get<double>(), 1.0) << g["strategy"];
    EXPECT_DOUBLE_EQ(g["mean"]["EntMent"].get<double>(), 1.0) << g["strategy"];
    EXPECT_DOUBLE_EQ(g["mean"]["PRISMA"].get<double>(), 1.0) << g["strategy"];
    EXPECT_DOUBLE_EQ(g["mean"]["QA"].get<double>(), 1.0) << g["strategy"];
    EXPECT_GT(g["mean"]["NLI"].get<double>(), 0.0) << g["strategy"];
    EXPECT_EQ(g["per_seed"].size(), 2u);
  }
  EXPECT_TRUE(fs::exists(config.output_dir / "report_summary.json"));
  EXPECT_TRUE(fs::exists(config.output_dir / "reference_qa.jsonl"));
  auto csv = read_file(config.output_dir / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "strategy,mode,PRISMA,QA,NLI,EntMent,Rouge-L");
  auto table = render_report_table(summary);
  EXPECT_LT(table.find("PRISMA"), table.find("Rouge-L"));
  EXPECT_NE(table.find("100.00"), std::string::npos);
}

TEST(Evaluate, SelfBaselineIsNeverSignificant) {
  Workspace ws;
  auto config = ws.config({{"strategies", {"nocontext", "bm25"}}});
  auto backends = RoleBackends::from_config(config);
  run(config, backends);
  evaluate_run(config.output_dir, config, backends);
  auto s = summarize_reports(config.output_dir, config.output_dir, 200, 1);
  for (const auto& g : s["groups"]) {
    ASSERT_TRUE(g.contains("significance"));
    for (const auto& [col, sig] : g["significance"].items()) {
      EXPECT_EQ(sig["p_value"].get<double>(), 1.0) << col;
      EXPECT_FALSE(sig["significant"].get<bool>());
    }
  }
  // Only the legend line carries a dagger.
  auto table = render_report_table(s);
  EXPECT_EQ(table.find("†"), table.rfind("†"));
  EXPECT_EQ(table.find("†"), table.find("† p < 0.05"));
}
