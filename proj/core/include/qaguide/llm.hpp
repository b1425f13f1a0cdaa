#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qaguide/error.hpp"

namespace qaguide {

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

inline constexpr double kDefaultTemperature = 0.4;
inline constexpr double kJudgeTemperature = 0.0;

struct GenerationRequest {
  std::vector<ChatMessage> messages;
  double temperature = kDefaultTemperature;
  int max_new_tokens = 1024;
  std::optional<std::int64_t> seed;
  /// Pre-filled start of the assistant turn (used for trace injection).
  std::optional<std::string> assistant_prefix;

  /// Throws kValidation when the request breaks its invariants.
  void validate() const;
  /// The concatenated message contents; what mock scripts match against.
  std::string prompt_text() const;
};

GenerationRequest make_user_request(std::string prompt,
                                    double temperature = kDefaultTemperature,
                                    int max_new_tokens = 1024);

struct GenerationResult {
  std::string text;
  std::size_t prompt_tokens = 0;
  std::size_t output_tokens = 0;
  std::string backend_id;
  /// Numeric side channel for stub scoring backends.
  std::optional<double> score;
  int attempts = 1;
};

struct RetryPolicy {
  int max_attempts = 3;
  int base_backoff_ms = 500;

  /// Wait before attempt `attempt + 1`, for attempt >= 1. Non-decreasing.
  std::chrono::milliseconds backoff(int attempt) const;
};

/// Blocks callers once `capacity` holders are inside.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int capacity);

  void acquire();
  void release();
  int capacity() const noexcept { return capacity_; }
  int in_flight() const;
  int peak() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int capacity_;
  int in_flight_ = 0;
  int peak_ = 0;
};

/// Shared contract for every model role (reasoner, generator, judge,
/// checker, answerer). Implementations override do_generate; generate()
/// enforces the concurrency cap so that it holds for any caller.
class Backend {
 public:
  explicit Backend(int max_concurrency = 1) : limiter_(max_concurrency) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  GenerationResult generate(const GenerationRequest& request);

  virtual std::string id() const = 0;
  int max_concurrency() const noexcept { return limiter_.capacity(); }
  /// Highest number of simultaneous in-flight generate() calls observed.
  int peak_in_flight() const { return limiter_.peak(); }

 protected:
  virtual GenerationResult do_generate(const GenerationRequest& request) = 0;

 private:
  ConcurrencyLimiter limiter_;
};

using BackendPtr = std::shared_ptr<Backend>;

/// One slot of a batch: the result, or the error that request produced.
using BatchOutcome = std::variant<GenerationResult, BackendError>;

inline bool ok(const BatchOutcome& o) {
  return std::holds_alternative<GenerationResult>(o);
}

GenerationResult generate(const GenerationRequest& request, Backend& backend);

/// Runs requests with at most backend.max_concurrency() in flight. Results
/// align with `requests`; failures stay in their slot.
std::vector<BatchOutcome> generate_batch(const std::vector<GenerationRequest>& requests,
                                         Backend& backend);

/// Backend driven by a callable. Handy for rule-based judges and tests.
class FunctionBackend : public Backend {
 public:
  using Fn = std::function<GenerationResult(const GenerationRequest&)>;

  FunctionBackend(std::string id, Fn fn, int max_concurrency = 1)
      : Backend(max_concurrency), id_(std::move(id)), fn_(std::move(fn)) {}

  std::string id() const override { return id_; }

 protected:
  GenerationResult do_generate(const GenerationRequest& request) override;

 private:
  std::string id_;
  Fn fn_;
};

/// Text-only convenience wrapper around FunctionBackend.
BackendPtr make_text_backend(std::string id,
                             std::function<std::string(const GenerationRequest&)> fn,
                             int max_concurrency = 1);

/// Decorator that records every request it forwards, in call order.
class CapturingBackend : public Backend {
 public:
  explicit CapturingBackend(BackendPtr inner);

  std::string id() const override { return inner_->id(); }
  std::vector<GenerationRequest> requests() const;
  std::size_t call_count() const;
  void clear();

 protected:
  GenerationResult do_generate(const GenerationRequest& request) override;

 private:
  BackendPtr inner_;
  mutable std::mutex mu_;
  std::vector<GenerationRequest> requests_;
};

std::size_t approx_word_count(std::string_view text);

}  // namespace qaguide
