#include "qaguide/reward_service.hpp"

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "qaguide/error.hpp"
#include "qaguide/records.hpp"
#include "qaguide/text.hpp"

namespace qaguide {

using nlohmann::json;

ReferenceStore ReferenceStore::load(const std::filesystem::path& path) {
  ReferenceStore store;
  for (const auto& row : records::read_jsonl(path)) {
    if (!row.contains("task_id") || !row["task_id"].is_string()) {
      throw Error(ErrorKind::kParse, path.string() + ": reference record without task_id");
    }
    Entry e;
    e.character = row.value("character", std::string());
    if (row.contains("items") && !row["items"].is_null()) {
      QaReference ref;
      ref.items = records::qa_pairs_from_json(row["items"]);
      ref.source_task_id = row["task_id"].get<std::string>();
      e.reference = std::move(ref);
    }
    if (row.contains("gold_description") && row["gold_description"].is_string()) {
      e.gold_description = row["gold_description"].get<std::string>();
    }
    if (!e.reference && !e.gold_description) {
      throw Error(ErrorKind::kParse, path.string() + ": reference record '" +
                                         row["task_id"].get<std::string>() +
                                         "' has neither items nor gold_description");
    }
    store.add(row["task_id"].get<std::string>(), std::move(e));
  }
  return store;
}

void ReferenceStore::add(std::string task_id, Entry entry) {
  std::lock_guard lock(mu_);
  entries_[std::move(task_id)] = std::move(entry);
}

bool ReferenceStore::contains(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  return entries_.count(task_id) > 0;
}

std::optional<ReferenceStore::Entry> ReferenceStore::get(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(task_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ReferenceStore::cache_reference(const std::string& task_id, QaReference reference) {
  std::lock_guard lock(mu_);
  entries_[task_id].reference = std::move(reference);
}

std::size_t ReferenceStore::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

RewardScorer::RewardScorer(BackendPtr judge, std::shared_ptr<ReferenceStore> store,
                           PromptTemplates prompts)
    : judge_(std::move(judge)), store_(std::move(store)), prompts_(std::move(prompts)) {
  if (!judge_) throw Error(ErrorKind::kValidation, "reward scorer needs a judge backend");
  if (!store_) store_ = std::make_shared<ReferenceStore>();
}

QaReference RewardScorer::reference_for_gold(const std::string& gold, const std::string& character) {
  return extract_reference_qa(gold, *judge_, character, prompts_);
}

namespace {

ScoreHttpResponse error_response(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

}  // namespace

ScoreHttpResponse RewardScorer::handle_score(std::string_view request_body) {
  json body;
  try {
    body = json::parse(request_body);
  } catch (const json::parse_error&) {
    return error_response(400, "request body is not valid JSON");
  }
  if (!body.is_object()) return error_response(400, "request body must be an object");
  if (!body.contains("trace_text") || !body["trace_text"].is_string()) {
    return error_response(400, "trace_text is required");
  }

  TraceFormat format;
  if (auto f = body.find("format"); f != body.end() && f->is_object()) {
    format.include_explanation = f->value("include_explanation", true);
    format.include_type = f->value("include_type", true);
    format.include_answer = f->value("include_answer", true);
  }
  if (!format.include_answer) return error_response(400, "traces without answers cannot be scored");

  const auto trace_text = body["trace_text"].get<std::string>();
  auto parsed = parse_trace(trace_text, format);
  if (!parsed.is_none && parsed.items.empty()) {
    return error_response(400, "unparseable trace: " +
                                   (parsed.warnings.empty() ? std::string("no items") : parsed.warnings.front()));
  }

  QaReference reference;
  try {
    if (body.contains("task_id") && body["task_id"].is_string()) {
      auto task_id = body["task_id"].get<std::string>();
      auto entry = store_->get(task_id);
      if (!entry) return error_response(400, "unknown task_id '" + task_id + "'");
      if (entry->reference) {
        reference = *entry->reference;
      } else {
        reference = reference_for_gold(*entry->gold_description, entry->character);
        reference.source_task_id = task_id;
        store_->cache_reference(task_id, reference);
      }
    } else if (body.contains("gold_description") && body["gold_description"].is_string()) {
      reference = reference_for_gold(body["gold_description"].get<std::string>(),
                                     body.value("character", std::string()));
    } else {
      return error_response(400, "either task_id or gold_description is required");
    }

    ReasoningTrace trace;
    trace.items = std::move(parsed.items);
    auto score = reward_score(trace, reference, *judge_, format, prompts_);
    json out = {{"precision", score.precision},
                {"recall", score.recall},
                {"f1", score.f1},
                {"verified_generated", score.verified_generated},
                {"verified_reference", score.verified_reference},
                {"num_generated", score.num_generated},
                {"num_reference", score.num_reference},
                {"parse_warnings", parsed.warnings.size()},
                {"warnings", parsed.warnings}};
    for (const auto& w : score.warnings) out["warnings"].push_back(w);
    return {200, out.dump()};
  } catch (const BackendError& e) {
    return error_response(502, std::string("judge backend failure: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kEmptyReference) return error_response(422, e.what());
    return error_response(400, e.what());
  }
}

struct RewardServer::Impl {
  std::shared_ptr<RewardScorer> scorer;
  httplib::Server server;
  std::thread thread;
};

RewardServer::RewardServer(std::shared_ptr<RewardScorer> scorer) : impl_(std::make_unique<Impl>()) {
  impl_->scorer = std::move(scorer);
  impl_->server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });
  impl_->server.Post("/score", [scorer = impl_->scorer](const httplib::Request& req, httplib::Response& res) {
    auto out = scorer->handle_score(req.body);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  });
}

RewardServer::~RewardServer() { stop(); }

int RewardServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void RewardServer::serve_forever(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorKind::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void RewardServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace qaguide
