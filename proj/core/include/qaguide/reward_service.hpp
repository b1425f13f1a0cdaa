#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "qaguide/llm.hpp"
#include "qaguide/prompts.hpp"
#include "qaguide/reward.hpp"

namespace qaguide {

/// task_id -> QA reference, or a gold description whose reference is
/// extracted on first use.
class ReferenceStore {
 public:
  struct Entry {
    std::optional<QaReference> reference;
    std::optional<std::string> gold_description;
    std::string character;
  };

  ReferenceStore() = default;
  ReferenceStore(ReferenceStore&& other) noexcept : entries_(std::move(other.entries_)) {}

  /// JSON lines with `task_id` and either `items` ([{q, a}]) or
  /// `gold_description` (optional `character`).
  static ReferenceStore load(const std::filesystem::path& path);

  void add(std::string task_id, Entry entry);
  bool contains(const std::string& task_id) const;
  std::optional<Entry> get(const std::string& task_id) const;
  void cache_reference(const std::string& task_id, QaReference reference);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, Entry> entries_;
};

struct ScoreHttpResponse {
  int status = 200;
  std::string body;
};

/// Scoring logic behind POST /score, kept separate from the socket layer.
class RewardScorer {
 public:
  RewardScorer(BackendPtr judge, std::shared_ptr<ReferenceStore> store,
               PromptTemplates prompts = PromptTemplates::defaults());

  ScoreHttpResponse handle_score(std::string_view request_body);

 private:
  QaReference reference_for_gold(const std::string& gold, const std::string& character);

  BackendPtr judge_;
  std::shared_ptr<ReferenceStore> store_;
  PromptTemplates prompts_;
};

/// HTTP front end: POST /score, GET /healthz.
class RewardServer {
 public:
  explicit RewardServer(std::shared_ptr<RewardScorer> scorer);
  ~RewardServer();
  RewardServer(const RewardServer&) = delete;
  RewardServer& operator=(const RewardServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void serve_forever(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qaguide
