#include "qaguide/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace qaguide {

using nlohmann::json;

namespace {

constexpr std::string_view kInlineSuffix = "+inline-prefix";

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(HttpBackendOptions options)
    : Backend(options.max_concurrency), options_(std::move(options)) {
  const auto& url = options_.base_url;
  auto scheme_end = url.find("://");
  if (url.empty() || scheme_end == std::string::npos) {
    throw Error(ErrorKind::kValidation, "http backend needs an absolute base_url, got '" + url + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (options_.api_key.empty()) {
    if (const char* key = std::getenv("LLM_API_KEY")) options_.api_key = key;
  }
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::id() const { return "http:" + options_.model_name; }

std::string HttpBackend::build_body(const GenerationRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  json body = {{"model", options_.model_name},
               {"temperature", request.temperature},
               {"max_tokens", request.max_new_tokens}};
  if (request.seed) body["seed"] = *request.seed;
  if (request.assistant_prefix) {
    if (options_.supports_prefill) {
      messages.push_back({{"role", "assistant"}, {"content", *request.assistant_prefix}});
      // vLLM-style prefill: continue the final assistant message in place.
      body["continue_final_message"] = true;
      body["add_generation_prompt"] = false;
    } else {
      std::string folded =
          "\n\nThe following block is your own prior reasoning; continue from it and give only "
          "the final answer.\n" +
          *request.assistant_prefix;
      for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if ((*it)["role"] == "user") {
          (*it)["content"] = (*it)["content"].get<std::string>() + folded;
          break;
        }
      }
    }
  }
  body["messages"] = std::move(messages);
  return body.dump();
}

GenerationResult HttpBackend::attempt(const std::string& body) const {
  httplib::Client client(scheme_host_port_);
  auto timeout = std::chrono::milliseconds(options_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  auto started = std::chrono::steady_clock::now();
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
  if (!res) {
    auto elapsed = std::chrono::steady_clock::now() - started;
    auto err = res.error();
    bool timed_out = err == httplib::Error::ConnectionTimeout ||
                     (err == httplib::Error::Read && elapsed >= timeout * 9 / 10);
    throw BackendError(timed_out ? ErrorKind::kTimeout : ErrorKind::kTransport,
                       id() + ": " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError(ErrorKind::kHttpStatus,
                       id() + ": HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 200),
                       res->status);
  }

  GenerationResult out;
  try {
    auto j = json::parse(res->body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    out.text = content.is_null() ? std::string() : content.get<std::string>();
    if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
      out.prompt_tokens = usage->value("prompt_tokens", 0u);
      out.output_tokens = usage->value("completion_tokens", 0u);
    }
  } catch (const json::exception& e) {
    throw BackendError(ErrorKind::kSchema, id() + ": unexpected response body: " + e.what(),
                       res->status);
  }
  out.backend_id = id();
  return out;
}

GenerationResult HttpBackend::do_generate(const GenerationRequest& request) {
  const auto body = build_body(request);
  const int max_attempts = std::max(1, options_.retry.max_attempts);
  for (int attempt_no = 1;; ++attempt_no) {
    try {
      auto out = attempt(body);
      out.attempts = attempt_no;
      if (request.assistant_prefix && !options_.supports_prefill) {
        out.backend_id += kInlineSuffix;
      }
      return out;
    } catch (const BackendError& e) {
      bool retry = e.kind() == ErrorKind::kTransport || e.kind() == ErrorKind::kTimeout ||
                   (e.kind() == ErrorKind::kHttpStatus && retryable_status(e.status()));
      if (!retry || attempt_no >= max_attempts) {
        throw BackendError(e.kind(), e.what(), e.status(), attempt_no);
      }
    }
    std::this_thread::sleep_for(options_.retry.backoff(attempt_no));
  }
}

}  // namespace qaguide
