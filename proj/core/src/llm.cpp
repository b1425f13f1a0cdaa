#include "qaguide/llm.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "qaguide/text.hpp"

namespace qaguide {

void GenerationRequest::validate() const {
  if (messages.empty()) throw Error(ErrorKind::kValidation, "request has no messages");
  if (!std::isfinite(temperature) || temperature < 0.0 || temperature > 2.0) {
    throw Error(ErrorKind::kValidation, "temperature must be finite and within [0, 2]");
  }
  if (max_new_tokens < 1) throw Error(ErrorKind::kValidation, "max_new_tokens must be positive");
}

std::string GenerationRequest::prompt_text() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += messages[i].content;
  }
  return out;
}

GenerationRequest make_user_request(std::string prompt, double temperature, int max_new_tokens) {
  GenerationRequest r;
  r.messages.push_back({"user", std::move(prompt)});
  r.temperature = temperature;
  r.max_new_tokens = max_new_tokens;
  return r;
}

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
  if (attempt < 1) return std::chrono::milliseconds(0);
  // base * 2^(attempt-1), saturating well below overflow.
  int shift = std::min(attempt - 1, 20);
  long long ms = static_cast<long long>(std::max(base_backoff_ms, 0)) << shift;
  return std::chrono::milliseconds(std::min(ms, 10LL * 60 * 1000));
}

ConcurrencyLimiter::ConcurrencyLimiter(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw Error(ErrorKind::kValidation, "max_concurrency must be >= 1");
}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < capacity_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

int ConcurrencyLimiter::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

int ConcurrencyLimiter::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

GenerationResult Backend::generate(const GenerationRequest& request) {
  request.validate();
  limiter_.acquire();
  struct Release {
    ConcurrencyLimiter& l;
    ~Release() { l.release(); }
  } release{limiter_};
  return do_generate(request);
}

GenerationResult generate(const GenerationRequest& request, Backend& backend) {
  return backend.generate(request);
}

std::vector<BatchOutcome> generate_batch(const std::vector<GenerationRequest>& requests,
                                         Backend& backend) {
  std::vector<std::optional<BatchOutcome>> slots(requests.size());
  auto run_one = [&](std::size_t i) {
    try {
      slots[i].emplace(backend.generate(requests[i]));
    } catch (const BackendError& e) {
      slots[i].emplace(e);
    } catch (const Error& e) {
      slots[i].emplace(BackendError(e.kind(), e.what()));
    } catch (const std::exception& e) {
      slots[i].emplace(BackendError(ErrorKind::kTransport, e.what()));
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(requests.size(), static_cast<std::size_t>(backend.max_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < requests.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < requests.size(); i = next++) run_one(i);
      });
    }
  }

  std::vector<BatchOutcome> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

GenerationResult FunctionBackend::do_generate(const GenerationRequest& request) {
  auto result = fn_(request);
  if (result.backend_id.empty()) result.backend_id = id_;
  return result;
}

BackendPtr make_text_backend(std::string id,
                             std::function<std::string(const GenerationRequest&)> fn,
                             int max_concurrency) {
  auto wrapped = [fn = std::move(fn)](const GenerationRequest& r) {
    GenerationResult out;
    out.text = fn(r);
    out.prompt_tokens = approx_word_count(r.prompt_text());
    out.output_tokens = approx_word_count(out.text);
    return out;
  };
  return std::make_shared<FunctionBackend>(std::move(id), std::move(wrapped), max_concurrency);
}

CapturingBackend::CapturingBackend(BackendPtr inner)
    : Backend(inner->max_concurrency()), inner_(std::move(inner)) {}

std::vector<GenerationRequest> CapturingBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::size_t CapturingBackend::call_count() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

void CapturingBackend::clear() {
  std::lock_guard lock(mu_);
  requests_.clear();
}

GenerationResult CapturingBackend::do_generate(const GenerationRequest& request) {
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  return inner_->generate(request);
}

std::size_t approx_word_count(std::string_view s) { return text::split_whitespace(s).size(); }

}  // namespace qaguide
