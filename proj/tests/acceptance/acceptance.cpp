// Acceptance checks, one PASS/FAIL/SKIP line per criterion. Runs entirely on
// mock backends; AC10 additionally needs the public BookWorm data.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qaguide/bm25.hpp"
#include "qaguide/corpus.hpp"
#include "qaguide/metrics.hpp"
#include "qaguide/mock_backend.hpp"
#include "qaguide/pipeline.hpp"
#include "qaguide/reward.hpp"
#include "qaguide/reward_service.hpp"
#include "qaguide/significance.hpp"
#include "qaguide/strategies.hpp"
#include "qaguide/trace.hpp"

using namespace qaguide;
using namespace qaguide::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict = Verdict::kPass;
  std::string detail;
};

// Collects failures; the first few messages go into the detail line.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 3) {
      if (!detail_.empty()) detail_ += "; ";
      detail_ += what;
    }
  }
  Outcome outcome(const std::string& pass_detail) const {
    if (failures_ == 0) return {Verdict::kPass, pass_detail};
    return {Verdict::kFail, std::to_string(failures_) + " failure(s): " + detail_};
  }

 private:
  std::size_t failures_ = 0;
  std::string detail_;
};

std::string question_of(const GenerationRequest& r) {
  const auto& p = r.messages.back().content;
  auto b = p.rfind("\nQuestion: ");
  if (b == std::string::npos) return {};
  b += 11;
  return p.substr(b, p.find('\n', b) - b);
}

Outcome ac1_trace_round_trip() {
  Checker c;
  Rng rng(1001);
  const auto formats = all_trace_formats();
  for (int i = 0; i < 1000; ++i) {
    const auto& format = formats[static_cast<std::size_t>(i) % formats.size()];
    auto items = random_items(rng, 10);
    for (auto& it : items) it = project(it, format);
    auto text = serialize_trace(items, format);
    auto parsed = parse_trace(text, format);
    c.expect(parsed.items == items, "round trip differs for case " + std::to_string(i));
    c.expect(parsed.is_none == items.empty(), "sentinel flag wrong for case " + std::to_string(i));
  }
  for (const auto& format : formats) {
    c.expect(serialize_trace(std::vector<QaItem>{}, format) == kNoneSentinel, "empty trace is not None");
    auto none = parse_trace(kNoneSentinel, format);
    c.expect(none.is_none && none.items.empty(), "None does not parse to the empty trace");
  }
  return c.outcome("1000 traces over 8 formats");
}

Outcome ac2_reward_arithmetic() {
  Checker c;
  auto judge = make_text_backend("scripted", [](const GenerationRequest& r) {
    auto q = question_of(r);
    bool yes = q == "g1" || q == "g2" || q == "r1" || q == "r2" || q == "r3";
    return std::string(yes ? "yes" : "no");
  }, 4);
  ReasoningTrace trace;
  for (const char* q : {"g1", "g2", "g3", "g4"}) trace.items.push_back({q, "", "a", QuestionType::kOther});
  QaReference ref{{{"r1", "a"}, {"r2", "a"}, {"r3", "a"}, {"r4", "a"}, {"r5", "a"}}, "t"};
  const double f1 = 2.0 * 0.5 * 0.6 / 1.1;

  auto lib = reward_score(trace, ref, *judge);
  c.expect(std::abs(lib.precision - 0.5) < 1e-9 && std::abs(lib.recall - 0.6) < 1e-9 &&
               std::abs(lib.f1 - f1) < 1e-9 && std::abs(lib.f1 - 0.5455) < 1e-4,
           "library score off");
  auto empty = reward_score(ReasoningTrace{}, ref, *judge);
  c.expect(empty.precision == 0.0 && empty.recall == 0.0 && empty.f1 == 0.0, "empty trace not (0,0,0)");

  auto store = std::make_shared<ReferenceStore>();
  ReferenceStore::Entry entry;
  entry.reference = ref;
  store->add("t", entry);
  RewardServer server(std::make_shared<RewardScorer>(judge, store));
  int port = server.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);
  const TraceFormat qa_only{false, false, true};
  const json format = {{"include_explanation", false}, {"include_type", false}};
  auto post = [&](const std::string& trace_text) -> json {
    auto body = json{{"task_id", "t"}, {"trace_text", trace_text}, {"format", format}};
    auto res = client.Post("/score", body.dump(), "application/json");
    if (!res || res->status != 200) return json();
    return json::parse(res->body);
  };
  auto http = post(serialize_trace(trace, qa_only));
  c.expect(!http.is_null(), "POST /score failed");
  if (!http.is_null()) {
    c.expect(std::abs(http["precision"].get<double>() - 0.5) < 1e-9 &&
                 std::abs(http["recall"].get<double>() - 0.6) < 1e-9 &&
                 std::abs(http["f1"].get<double>() - f1) < 1e-9,
             "HTTP score off");
  }
  auto http_empty = post("None");
  c.expect(!http_empty.is_null() && http_empty["f1"].get<double>() == 0.0 &&
               http_empty["precision"].get<double>() == 0.0 && http_empty["recall"].get<double>() == 0.0,
           "HTTP empty trace not (0,0,0)");
  server.stop();
  return c.outcome("P=0.5 R=0.6 F1=0.5455 via library and POST /score");
}

Outcome ac3_reward_oracle() {
  Checker c;
  Rng rng(303);
  auto judge = make_rule_backend("verify_exact", 8);
  std::vector<QaPair> pool;
  for (int i = 0; i < 10; ++i) pool.push_back({random_phrase(rng, 2, 5) + "?", random_phrase(rng, 1, 3)});
  for (int i = 0; i < 200; ++i) {
    std::vector<QaPair> gen, ref;
    for (std::size_t k = uniform(rng, 0, 6); k > 0; --k) gen.push_back(pool[uniform(rng, 0, pool.size() - 1)]);
    for (std::size_t k = uniform(rng, 1, 6); k > 0; --k) ref.push_back(pool[uniform(rng, 0, pool.size() - 1)]);
    ReasoningTrace t;
    for (const auto& p : gen) t.items.push_back({p.question, "", p.answer, QuestionType::kOther});
    auto got = reward_score(t, QaReference{ref, "t"}, *judge);
    auto want = oracle_reward(gen, ref);
    c.expect(got.precision == want.p && got.recall == want.r && got.f1 == want.f,
             "case " + std::to_string(i) + " differs from oracle");
  }
  return c.outcome("200 cases equal the exhaustive oracle");
}

Outcome ac4_lcs_oracle() {
  Checker c;
  Rng rng(404);
  const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e"};
  for (int i = 0; i < 500; ++i) {
    std::vector<std::string> a(uniform(rng, 0, 20)), b(uniform(rng, 0, 20));
    for (auto& t : a) t = alphabet[uniform(rng, 0, alphabet.size() - 1)];
    for (auto& t : b) t = alphabet[uniform(rng, 0, alphabet.size() - 1)];
    c.expect(lcs_length(a, b) == brute_force_lcs(a, b), "pair " + std::to_string(i) + " differs");
  }
  return c.outcome("500 pairs equal brute-force LCS");
}

Outcome ac5_bm25_oracle() {
  Checker c;
  Rng rng(505);
  const auto& vocab = field_vocab();
  auto counter = TokenCounter::whitespace();
  for (int corpus = 0; corpus < 100; ++corpus) {
    const std::size_t n_chunks = uniform(rng, 1, 100);
    std::vector<Chunk> chunks;
    for (std::size_t i = 0; i < n_chunks; ++i) {
      std::string text;
      for (std::size_t w = uniform(rng, 1, 12); w > 0; --w) {
        text += vocab[uniform(rng, 0, 11)] + " ";
      }
      chunks.push_back({"b", i, text, counter.count(text)});
    }
    auto query = lower_alnum(vocab[uniform(rng, 0, 11)]);
    if (uniform(rng, 0, 1)) {
      for (auto& t : lower_alnum(vocab[uniform(rng, 0, 11)])) query.push_back(t);
    }
    if (query.empty()) query.push_back("mill");
    const std::size_t budget = uniform(rng, 1, 200);

    auto order = bm25_rank(query, chunks);
    std::vector<std::size_t> picked;
    std::size_t used = 0;
    for (auto i : order) {
      if (used + chunks[i].token_count > budget) break;
      used += chunks[i].token_count;
      picked.push_back(i);
    }
    std::sort(picked.begin(), picked.end());
    c.expect(picked == oracle_bm25_selection(query, chunks, budget), "corpus " + std::to_string(corpus) + " differs");
  }

  // Two equal-length chunks, the term in one of them once: idf = ln 2 and
  // the length factor is 1.
  for (double k1 : {0.9, 1.2, 2.0}) {
    Bm25Params p{k1, 0.75};
    std::vector<Bm25Document> docs = {bm25_document("lighthouse keeper"), bm25_document("fishing nets")};
    auto stats = bm25_corpus_stats(docs);
    double got = bm25_score({"lighthouse"}, docs[0], stats, p);
    double want = std::log(2.0) * (k1 + 1.0) / (1.0 + k1);
    c.expect(std::abs(got - want) < 1e-9, "closed-form fixture off for k1=" + std::to_string(k1));
  }
  return c.outcome("100 corpora equal exhaustive scoring; ln 2 fixture holds");
}

Outcome ac6_chunker() {
  Checker c;
  Rng rng(606);
  const TokenCounter counters[] = {TokenCounter::whitespace(), TokenCounter::byte_ratio(3)};
  for (int i = 0; i < 1000; ++i) {
    auto text = random_text(rng, 50);
    const auto& counter = counters[i % 2];
    const auto budget = uniform(rng, 1, 30);
    auto chunks = chunk_text(text, budget, counter);
    std::string joined;
    bool ok = true;
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      const auto& ch = chunks[k];
      joined += ch.text;
      ok = ok && ch.index == k && !ch.text.empty() && !is_utf8_continuation(ch.text.front());
      // Over budget only when the chunk is a single code point.
      std::size_t cp_len = 1;
      while (cp_len < ch.text.size() && is_utf8_continuation(ch.text[cp_len])) ++cp_len;
      ok = ok && (ch.token_count <= budget || cp_len == ch.text.size());
    }
    c.expect(ok, "invariant broken for case " + std::to_string(i));
    c.expect(joined == text, "reconstruction failed for case " + std::to_string(i));
  }
  return c.outcome("1000 (text, budget) pairs");
}

Outcome ac7_significance() {
  Checker c;
  Rng rng(707);
  std::vector<double> base(50);
  for (auto& v : base) v = static_cast<double>(uniform(rng, 0, 100));
  auto same = significance_test(base, base, 10000, 7);
  c.expect(same.p_value == 1.0, "identical vectors p != 1");
  std::vector<double> shifted = base;
  for (auto& v : shifted) v += 10.0;
  auto shift = significance_test(shifted, base, 10000, 7);
  c.expect(shift.p_value <= 0.001, "constant shift p > 0.001");
  c.expect(shift.p_value >= 1.0 / 10001.0, "p below 1/(n+1)");
  c.expect(significance_test(shifted, base, 10000, 7).p_value == shift.p_value, "not deterministic per seed");
  for (int i = 0; i < 20; ++i) {
    std::vector<double> a(uniform(rng, 1, 40)), b;
    for (auto& v : a) v = static_cast<double>(uniform(rng, 0, 1000)) / 10.0;
    for (auto v : a) b.push_back(v + static_cast<double>(uniform(rng, 0, 20)) - 10.0);
    auto r = significance_test(a, b, 1000, static_cast<std::uint64_t>(i));
    c.expect(r.p_value >= 1.0 / 1001.0 && r.p_value <= 1.0, "p out of range");
  }
  return c.outcome("p=1 on identical, p=" + std::to_string(shift.p_value) + " on shift");
}

Outcome ac8_call_graph() {
  Checker c;
  // Three ten-word sentences; ten-token chunks split the book in three.
  Book book{"b", "Harbour",
            "Alice keeps the old lighthouse lamp burning every night alone. "
            "Alice mends the old fishing nets down by the pier. "
            "Alice rows across the bay to visit her older sister."};
  CharacterTask task{"t", "b", "Alice", std::nullopt, 60};
  auto reasoner = std::make_shared<CapturingBackend>(make_text_backend("r", [](const GenerationRequest& r) {
    const auto& p = r.messages.back().content;
    auto w = p.find("Alice ");
    auto word = p.substr(w + 6, p.find(' ', w + 6) - w - 6);
    return "Q1: What does Alice do? E1: Stated in the chunk. A1: " + word + " T1: Event";
  }, 3));
  std::atomic<int> counter{0};
  auto generator = std::make_shared<CapturingBackend>(make_text_backend("g", [&](const GenerationRequest& r) {
    if (r.messages.back().content.find("Intermediate descriptions") != std::string::npos) return std::string("Merged.");
    return "Draft " + std::to_string(++counter) + ".";
  }, 3));
  PipelineContext ctx;
  ctx.generator = generator;
  ctx.reasoner = reasoner;
  ctx.open_marker = "<reason>";
  ctx.close_marker = "</reason>";

  run_strategy(task, book, {ContextKind::kHierarchical, 100, 10, 10}, ReasoningMode::kGuidedQa, ctx);
  std::size_t merges = 0;
  for (const auto& r : generator->requests()) {
    merges += r.messages.back().content.find("Intermediate descriptions") != std::string::npos ? 1 : 0;
  }
  c.expect(reasoner->call_count() == 3, "hierarchical: reasoner calls " + std::to_string(reasoner->call_count()));
  c.expect(generator->call_count() == 4 && merges == 1,
           "hierarchical: generator calls " + std::to_string(generator->call_count()));
  c.expect(merges == 1 && generator->requests().back().messages.back().content.find("Intermediate") != std::string::npos,
           "merge is not the last call");

  reasoner->clear();
  generator->clear();
  counter = 0;
  run_strategy(task, book, {ContextKind::kIncremental, 100, 10, 10}, ReasoningMode::kGuidedQa, ctx);
  auto inc = generator->requests();
  c.expect(inc.size() == 3, "incremental: expected 3 generator calls");
  for (std::size_t i = 1; i < inc.size(); ++i) {
    c.expect(inc[i].messages.back().content.find("Draft " + std::to_string(i) + ".") != std::string::npos,
             "incremental step " + std::to_string(i + 1) + " lacks the previous description");
  }

  generator->clear();
  auto d = run_strategy(task, book, {ContextKind::kLead, 100, 10, 100}, ReasoningMode::kGuidedQa, ctx);
  auto prefix = generator->requests().at(0).assistant_prefix.value_or("");
  const auto serialized = serialize_trace(*d.trace, ctx.trace_format);
  c.expect(prefix == "<reason>\n" + serialized + "\n</reason>", "guided prefix is not the trace between markers");
  c.expect(!d.trace->empty(), "guided trace is empty");

  auto thinker = make_text_backend("t", [](const GenerationRequest&) {
    return std::string("<reason>private musing</reason>Alice keeps the light.");
  });
  ctx.generator = thinker;
  auto built_in = run_strategy(task, book, {ContextKind::kLead, 100, 10, 100}, ReasoningMode::kBuiltIn, ctx);
  c.expect(built_in.text == "Alice keeps the light.", "built-in text keeps the thinking block");
  return c.outcome("3 reasoner + 3 stage-1 + 1 merge; incremental, guided, built-in checked");
}

std::map<std::string, std::string> snapshot(const fs::path& out) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    if (e.path().extension() == ".tmp") continue;
    files[fs::relative(e.path(), out).string()] = read_file(e.path());
  }
  return files;
}

class FailFor : public Backend {
 public:
  FailFor(BackendPtr inner, std::string needle)
      : Backend(inner->max_concurrency()), inner_(std::move(inner)), needle_(std::move(needle)) {}
  std::string id() const override { return inner_->id(); }

 protected:
  GenerationResult do_generate(const GenerationRequest& r) override {
    if (r.prompt_text().find(needle_) != std::string::npos) throw BackendError(ErrorKind::kTransport, "killed");
    return inner_->generate(r);
  }

 private:
  BackendPtr inner_;
  std::string needle_;
};

Outcome ac9_end_to_end() {
  Checker c;
  auto make_workspace = [](const TempDir& dir) {
    for (const auto& e : fs::directory_iterator(test_data_dir() / "e2e")) {
      fs::copy_file(e.path(), dir.path() / e.path().filename());
    }
    return RunConfig::load(dir / "config.json");
  };
  TempDir a, b, crashed;
  auto ca = make_workspace(a);
  auto cb = make_workspace(b);
  auto cc = make_workspace(crashed);
  c.expect(ca.strategies.size() == 6 && ca.seeds.size() == 2, "fixture is not 6 strategies x 2 seeds");

  auto ra = run(ca, RoleBackends::from_config(ca));
  auto rb = run(cb, RoleBackends::from_config(cb));
  c.expect(ra.completed == 36 && ra.failed == 0, "first run did not complete 36 tasks");
  const auto reference = snapshot(ca.output_dir);
  c.expect(reference == snapshot(cb.output_dir), "repeated runs differ");

  auto healthy = RoleBackends::from_config(cc);
  auto faulty = healthy;
  faulty.generator = std::make_shared<FailFor>(healthy.generator, "character Jonah Pike");
  auto first = run(cc, faulty);
  c.expect(first.failed == 12, "crash simulation failed " + std::to_string(first.failed) + " tasks");
  write_file(cc.output_dir / "seed-1" / "tasks" / "lead-120__guided_qa__wetherby-jonah.json.tmp", "{\"text\": \"half");
  auto resumed = run(cc, healthy);
  c.expect(resumed.completed == 12 && resumed.skipped == 24, "resume did not redo exactly the failed tasks");
  c.expect(snapshot(cc.output_dir) == reference, "resumed run differs from uninterrupted run");

  auto ev = evaluate_run(ca.output_dir, ca, RoleBackends::from_config(ca), {std::nullopt, 200, 0});
  c.expect(ev.reports == 36, "evaluate scored " + std::to_string(ev.reports) + " descriptions");
  for (const auto& g : ev.summary["groups"]) {
    for (const char* col : {"Rouge-L", "EntMent", "PRISMA"}) {
      const auto& v = g["mean"][col];
      c.expect(v.is_number() && v.get<double>() == 1.0,
               g["strategy"].get<std::string>() + " " + col + " != 1.0");
    }
  }
  return c.outcome("2 books, 3 tasks, 2 seeds, 6 strategies; bit-identical; resume ok; F=1.0");
}

Outcome ac10_bookworm() {
  const char* dir = std::getenv("QAGUIDE_BOOKWORM_DIR");
  if (!dir || !fs::exists(fs::path(dir) / "books.jsonl") || !fs::exists(fs::path(dir) / "tasks.jsonl")) {
    return {Verdict::kSkip, "set QAGUIDE_BOOKWORM_DIR to a directory with books.jsonl and tasks.jsonl"};
  }
  Checker c;
  auto books = load_books(fs::path(dir) / "books.jsonl");
  auto tasks = load_tasks(fs::path(dir) / "tasks.jsonl", CorpusStyle::kBookWorm);
  auto stats = dataset_stats(books, tasks);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu books, %zu samples, %.2f chars/book", stats.num_books, stats.num_samples,
                stats.avg_characters_per_book);
  c.expect(stats.num_books == 324, std::string("books: ") + buf);
  c.expect(stats.num_samples == 5869, std::string("samples: ") + buf);
  c.expect(std::abs(stats.avg_characters_per_book - 9.74) <= 0.01, std::string("chars/book: ") + buf);
  return c.outcome(buf);
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Outcome()> fn;
    double limit_s;
  };
  const std::vector<Criterion> criteria = {
      {"AC1", "trace round trip", ac1_trace_round_trip, 5.0},
      {"AC2", "reward arithmetic", ac2_reward_arithmetic, 0.0},
      {"AC3", "reward oracle", ac3_reward_oracle, 0.0},
      {"AC4", "Rouge-L oracle", ac4_lcs_oracle, 30.0},
      {"AC5", "BM25 oracle", ac5_bm25_oracle, 0.0},
      {"AC6", "chunker invariants", ac6_chunker, 0.0},
      {"AC7", "significance test", ac7_significance, 10.0},
      {"AC8", "pipeline call graph", ac8_call_graph, 0.0},
      {"AC9", "end-to-end determinism", ac9_end_to_end, 60.0},
      {"AC10", "BookWorm ingest statistics", ac10_bookworm, 0.0},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.fn();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.verdict == Verdict::kPass && cr.limit_s > 0.0 && secs > cr.limit_s) {
      o = {Verdict::kFail, "took longer than " + std::to_string(cr.limit_s) + " s"};
    }
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kFail ? "FAIL" : "SKIP";
    std::printf("%-5s %s  %s: %s (%.2f s)\n", cr.id, tag, cr.name, o.detail.c_str(), secs);
    failed += o.verdict == Verdict::kFail ? 1 : 0;
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
