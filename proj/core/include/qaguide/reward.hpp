#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qaguide/llm.hpp"
#include "qaguide/prompts.hpp"
#include "qaguide/trace.hpp"

namespace qaguide {

struct QaPair {
  std::string question;
  std::string answer;

  friend bool operator==(const QaPair&, const QaPair&) = default;
  friend auto operator<=>(const QaPair&, const QaPair&) = default;
};

/// Silver-standard QA pairs extracted from a gold description.
struct QaReference {
  std::vector<QaPair> items;
  std::string source_task_id;
};

struct RewardScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t verified_generated = 0;
  std::size_t verified_reference = 0;
  std::size_t num_generated = 0;
  std::size_t num_reference = 0;
  std::vector<std::string> warnings;
};

/// 2PR/(P+R), or 0 when P+R is 0.
double harmonic_f1(double precision, double recall) noexcept;

/// Throws kEmptyReference when the judge yields no parseable pairs.
QaReference extract_reference_qa(std::string_view gold_description, Backend& judge,
                                 std::string_view character = {},
                                 const PromptTemplates& prompts = PromptTemplates::defaults());

/// Evidence for VERIFY: a set of QA pairs or free text.
using Evidence = std::variant<std::vector<QaPair>, std::string>;

/// Renders evidence for the judge prompt. QA pairs are sorted first so the
/// prompt does not depend on item order.
std::string render_evidence(const Evidence& evidence);

GenerationRequest verify_request(const QaPair& qa, const Evidence& evidence,
                                 const PromptTemplates& prompts = PromptTemplates::defaults());

struct VerifyResult {
  bool supported = false;
  /// Set when the judge reply was neither yes nor no.
  std::string warning;
};

/// Reads a leading yes/no token, case-insensitive.
VerifyResult parse_verdict(std::string_view reply);

bool verify(const QaPair& qa, const Evidence& evidence, Backend& judge,
            const PromptTemplates& prompts = PromptTemplates::defaults());

std::vector<QaPair> qa_pairs(const std::vector<QaItem>& items);

/// Precision: share of generated pairs the reference supports. Recall:
/// share of reference pairs the generated trace supports. An empty trace
/// scores (0, 0, 0). Judge calls are batched.
RewardScore reward_score(const ReasoningTrace& trace, const QaReference& reference,
                         Backend& judge, const TraceFormat& format = {},
                         const PromptTemplates& prompts = PromptTemplates::defaults());

}  // namespace qaguide
