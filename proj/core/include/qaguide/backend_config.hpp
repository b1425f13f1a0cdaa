#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "qaguide/llm.hpp"

namespace qaguide {

enum class BackendKind { kMock, kHttp };

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  std::optional<std::string> base_url;
  std::string model_name = "mock";
  int max_concurrency = 1;
  RetryPolicy retry;
  int timeout_ms = 120000;
  bool supports_prefill = true;
  /// Mock only: script file, or a built-in rule name.
  std::optional<std::filesystem::path> script;
  std::optional<std::string> rule;

  void validate() const;
};

/// Relative script paths resolve against `base_dir`.
BackendConfig backend_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const BackendConfig& config);

BackendPtr make_backend(const BackendConfig& config);

}  // namespace qaguide
