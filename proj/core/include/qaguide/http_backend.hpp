#pragma once

#include <string>

#include "qaguide/llm.hpp"

namespace qaguide {

struct HttpBackendOptions {
  /// e.g. "http://localhost:8000/v1"; requests go to {base_url}/chat/completions.
  std::string base_url;
  std::string model_name;
  int max_concurrency = 4;
  RetryPolicy retry;
  int timeout_ms = 120000;
  /// When false, the assistant prefix is folded into the last user message.
  bool supports_prefill = true;
  /// Bearer token. Empty means read LLM_API_KEY from the environment.
  std::string api_key;
};

/// Client for OpenAI-compatible chat-completions endpoints.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendOptions options);
  ~HttpBackend() override;

  std::string id() const override;

  /// Request body sent for `request`; exposed for inspection in tests.
  std::string build_body(const GenerationRequest& request) const;

 protected:
  GenerationResult do_generate(const GenerationRequest& request) override;

 private:
  GenerationResult attempt(const std::string& body) const;

  HttpBackendOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace qaguide
