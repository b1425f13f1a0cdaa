#include "qaguide/backend_config.hpp"

#include <nlohmann/json.hpp>

#include "qaguide/http_backend.hpp"
#include "qaguide/mock_backend.hpp"

namespace qaguide {

using nlohmann::json;

void BackendConfig::validate() const {
  if (max_concurrency < 1) throw Error(ErrorKind::kValidation, "max_concurrency must be >= 1");
  if (retry.max_attempts < 1) throw Error(ErrorKind::kValidation, "retry.max_attempts must be >= 1");
  if (timeout_ms < 1) throw Error(ErrorKind::kValidation, "timeout_ms must be positive");
  if (kind == BackendKind::kHttp && (!base_url || base_url->empty())) {
    throw Error(ErrorKind::kValidation, "http backend requires base_url");
  }
  if (kind == BackendKind::kMock && !script && !rule) {
    throw Error(ErrorKind::kValidation, "mock backend requires a script or a rule");
  }
}

BackendConfig backend_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::kValidation, "backend config must be an object");
  for (const char* secret : {"api_key", "apiKey", "token", "password"}) {
    if (j.contains(secret)) {
      throw Error(ErrorKind::kValidation,
                  std::string("backend config must not contain '") + secret +
                      "'; set LLM_API_KEY in the environment instead");
    }
  }
  BackendConfig c;
  auto kind = j.value("kind", std::string("mock"));
  if (kind == "mock") {
    c.kind = BackendKind::kMock;
  } else if (kind == "http") {
    c.kind = BackendKind::kHttp;
  } else {
    throw Error(ErrorKind::kValidation, "unknown backend kind '" + kind + "'");
  }
  if (j.contains("base_url")) c.base_url = j["base_url"].get<std::string>();
  c.model_name = j.value("model_name", c.kind == BackendKind::kMock ? "mock" : "");
  c.max_concurrency = j.value("max_concurrency", 1);
  if (auto r = j.find("retry"); r != j.end()) {
    c.retry.max_attempts = r->value("max_attempts", c.retry.max_attempts);
    c.retry.base_backoff_ms = r->value("base_backoff_ms", c.retry.base_backoff_ms);
  }
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.supports_prefill = j.value("supports_prefill", true);
  if (j.contains("script")) {
    std::filesystem::path p = j["script"].get<std::string>();
    c.script = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  if (j.contains("rule")) c.rule = j["rule"].get<std::string>();
  c.validate();
  return c;
}

json to_json(const BackendConfig& c) {
  json j = {{"kind", c.kind == BackendKind::kMock ? "mock" : "http"},
            {"model_name", c.model_name},
            {"max_concurrency", c.max_concurrency},
            {"retry", {{"max_attempts", c.retry.max_attempts},
                       {"base_backoff_ms", c.retry.base_backoff_ms}}},
            {"timeout_ms", c.timeout_ms},
            {"supports_prefill", c.supports_prefill}};
  if (c.base_url) j["base_url"] = *c.base_url;
  if (c.script) j["script"] = c.script->string();
  if (c.rule) j["rule"] = *c.rule;
  return j;
}

BackendPtr make_backend(const BackendConfig& config) {
  config.validate();
  if (config.kind == BackendKind::kHttp) {
    HttpBackendOptions o;
    o.base_url = *config.base_url;
    o.model_name = config.model_name;
    o.max_concurrency = config.max_concurrency;
    o.retry = config.retry;
    o.timeout_ms = config.timeout_ms;
    o.supports_prefill = config.supports_prefill;
    return std::make_shared<HttpBackend>(std::move(o));
  }
  if (config.script) {
    return std::make_shared<MockBackend>(MockBackend::load_script(*config.script),
                                         "mock:" + config.script->filename().string(),
                                         config.max_concurrency);
  }
  return make_rule_backend(*config.rule, config.max_concurrency);
}

}  // namespace qaguide
