#include <gtest/gtest.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "qaguide/error.hpp"
#include "qaguide/mock_backend.hpp"
#include "qaguide/reward_service.hpp"

using namespace qaguide;
using namespace qaguide::testing;
using nlohmann::json;

namespace {

const json kQaOnly = {{"include_explanation", false}, {"include_type", false}};

std::string question_of(const GenerationRequest& r) {
  const auto& p = r.messages.back().content;
  auto b = p.rfind("\nQuestion: ");
  if (b == std::string::npos) return {};
  b += 11;
  return p.substr(b, p.find('\n', b) - b);
}

BackendPtr fixture_judge() {
  return make_text_backend("scripted", [](const GenerationRequest& r) {
    auto q = question_of(r);
    bool yes = q == "g1" || q == "g2" || q == "r1" || q == "r2" || q == "r3";
    return std::string(yes ? "yes" : "no");
  }, 4);
}

std::shared_ptr<ReferenceStore> fixture_store() {
  auto store = std::make_shared<ReferenceStore>();
  ReferenceStore::Entry e;
  e.reference = QaReference{{{"r1", "a"}, {"r2", "a"}, {"r3", "a"}, {"r4", "a"}, {"r5", "a"}}, "t1"};
  store->add("t1", e);
  ReferenceStore::Entry g;
  g.gold_description = "Maren keeps the lighthouse.";
  g.character = "Maren";
  store->add("gold", g);
  return store;
}

class RewardServiceTest : public ::testing::Test {
 protected:
  void start(BackendPtr judge, std::shared_ptr<ReferenceStore> store = fixture_store()) {
    scorer_ = std::make_shared<RewardScorer>(std::move(judge), std::move(store));
    server_ = std::make_unique<RewardServer>(scorer_);
    port_ = server_->start("127.0.0.1", 0);
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    if (server_) server_->stop();
  }

  std::pair<int, json> post(const json& body) {
    auto res = client_->Post("/score", body.dump(), "application/json");
    if (!res) return {0, json()};
    return {res->status, json::parse(res->body)};
  }

  std::shared_ptr<RewardScorer> scorer_;
  std::unique_ptr<RewardServer> server_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

}  // namespace

TEST_F(RewardServiceTest, ScoresFixtureOverHttp) {
  start(fixture_judge());
  auto [status, body] = post({{"task_id", "t1"}, {"trace_text", "Q1: g1 A1: a\nQ2: g2 A2: a\nQ3: g3 A3: a\nQ4: g4 A4: a"},
                              {"format", {{"include_explanation", false}, {"include_type", false}}}});
  ASSERT_EQ(status, 200);
  EXPECT_DOUBLE_EQ(body["precision"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(body["recall"].get<double>(), 0.6);
  EXPECT_NEAR(body["f1"].get<double>(), 0.5454545, 1e-6);
  EXPECT_EQ(body["num_generated"], 4);
  EXPECT_EQ(body["num_reference"], 5);
}

TEST_F(RewardServiceTest, NoneTraceScoresZero) {
  start(fixture_judge());
  auto [status, body] = post({{"task_id", "t1"}, {"trace_text", "None"}});
  ASSERT_EQ(status, 200);
  EXPECT_EQ(body["f1"].get<double>(), 0.0);
  EXPECT_EQ(body["num_generated"], 0);
}

TEST_F(RewardServiceTest, HealthCheck) {
  start(fixture_judge());
  auto res = client_->Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
}

TEST_F(RewardServiceTest, BadRequests) {
  start(fixture_judge());
  EXPECT_EQ(post({{"task_id", "missing"}, {"trace_text", "None"}}).first, 400);
  EXPECT_EQ(post({{"trace_text", "None"}}).first, 400);
  EXPECT_EQ(post({{"task_id", "t1"}}).first, 400);
  EXPECT_EQ(post({{"task_id", "t1"}, {"trace_text", "free prose without items"}}).first, 400);
  EXPECT_EQ(post({{"task_id", "t1"}, {"trace_text", "Q1: x"}, {"format", {{"include_answer", false}}}}).first, 400);
  auto res = client_->Post("/score", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(RewardServiceTest, GoldDescriptionIsExtractedOnceAndCached) {
  auto judge = std::make_shared<CapturingBackend>(make_rule_backend("judge"));
  auto store = fixture_store();
  start(judge, store);
  const json req = {{"task_id", "gold"},
                    {"trace_text", "Q1: Complete the statement: Maren keeps the ___ A1: lighthouse"},
                    {"format", kQaOnly}};
  auto first = post(req);
  ASSERT_EQ(first.first, 200);
  EXPECT_DOUBLE_EQ(first.second["f1"].get<double>(), 1.0);
  EXPECT_TRUE(store->get("gold")->reference.has_value());
  auto calls = judge->call_count();
  post(req);
  // The second request only verifies; no new extraction call.
  EXPECT_EQ(judge->call_count() - calls, 2u);
}

TEST_F(RewardServiceTest, EmptyReferenceIs422) {
  start(make_text_backend("none", [](const GenerationRequest&) { return std::string("None"); }));
  auto [status, body] = post({{"gold_description", "Nothing."}, {"trace_text", "Q1: q A1: a"}, {"format", kQaOnly}});
  EXPECT_EQ(status, 422);
  EXPECT_TRUE(body.contains("error"));
}

TEST_F(RewardServiceTest, JudgeFailureIs502) {
  start(std::make_shared<FunctionBackend>("down", [](const GenerationRequest&) -> GenerationResult {
    throw BackendError(ErrorKind::kTransport, "unreachable");
  }));
  EXPECT_EQ(post({{"task_id", "t1"}, {"trace_text", "Q1: q A1: a"}, {"format", kQaOnly}}).first, 502);
}

TEST(ReferenceStore, LoadsItemsAndGoldRows) {
  TempDir dir;
  auto path = dir.path() / "refs.jsonl";
  write_file(path,
             R"({"task_id": "a", "items": [{"q": "Who?", "a": "Maren"}]})" "\n"
             R"({"task_id": "b", "gold_description": "Maren keeps the light.", "character": "Maren"})" "\n");
  auto store = ReferenceStore::load(path);
  EXPECT_EQ(store.size(), 2u);
  ASSERT_TRUE(store.get("a")->reference.has_value());
  EXPECT_EQ(store.get("a")->reference->items[0].answer, "Maren");
  EXPECT_EQ(store.get("b")->character, "Maren");
  write_file(path, R"({"task_id": "c"})" "\n");
  EXPECT_THROW(ReferenceStore::load(path), Error);
}
