#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qaguide/corpus.hpp"
#include "qaguide/llm.hpp"
#include "qaguide/prompts.hpp"
#include "qaguide/reward.hpp"
#include "qaguide/trace.hpp"

namespace qaguide {

struct PrfScore {
  double p = 0.0;
  double r = 0.0;
  double f = 0.0;

  friend bool operator==(const PrfScore&, const PrfScore&) = default;
};

/// Lowercased [a-z0-9]+ tokens, the tokenization Rouge-L runs on.
std::vector<std::string> rouge_tokens(std::string_view text);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Summary-level Rouge-L over whole texts.
PrfScore rouge_l(std::string_view candidate, std::string_view reference);

class EntityExtractor {
 public:
  virtual ~EntityExtractor() = default;
  /// Lowercased, deduplicated entity strings.
  virtual std::set<std::string> extract(std::string_view text) const = 0;
};

/// Maximal runs of capitalized tokens. A sentence-initial token that is a
/// function word or common verb is not treated as part of an entity.
class CapitalizedRunExtractor : public EntityExtractor {
 public:
  std::set<std::string> extract(std::string_view text) const override;
};

PrfScore entity_mention_f1(std::string_view candidate, std::string_view reference,
                           const EntityExtractor& extractor = CapitalizedRunExtractor{});

/// Set-overlap precision/recall/F1; an empty side zeroes its rate and F.
PrfScore set_prf(const std::set<std::string>& candidate, const std::set<std::string>& reference);

enum class FactSource { kGenerated, kReference };

struct FactSet {
  std::vector<std::string> facts;
  FactSource source = FactSource::kGenerated;
};

/// Parses a one-fact-per-line reply, dropping bullets, numbering, and blanks.
std::vector<std::string> parse_fact_lines(std::string_view reply);

FactSet extract_facts(std::string_view description, Backend& extractor_judge,
                      FactSource source = FactSource::kGenerated,
                      const PromptTemplates& prompts = PromptTemplates::defaults());

inline constexpr double kEntailmentThreshold = 0.5;

/// Checker score from a reply: the side-channel value when present, else
/// the first number in the text (clamped to [0, 1]), else yes/no.
std::optional<double> parse_checker_score(const GenerationResult& result);

GenerationRequest entailment_request(std::string_view document, std::string_view claim,
                                     const PromptTemplates& prompts = PromptTemplates::defaults());

/// Fraction of `claims` whose checker score against `document` exceeds 0.5.
double entailed_fraction(const std::vector<std::string>& claims, std::string_view document,
                         Backend& checker,
                         const PromptTemplates& prompts = PromptTemplates::defaults());

struct PrismaScore {
  PrfScore prf;
  FactSet candidate_facts;
  FactSet reference_facts;
};

PrismaScore prisma(std::string_view candidate, std::string_view reference,
                   Backend& extractor_judge, Backend& checker,
                   const PromptTemplates& prompts = PromptTemplates::defaults());

inline constexpr std::size_t kNliChunkTokens = 1024;

/// Share of facts whose best checker score over any book chunk exceeds 0.5.
double nli_grounding(const FactSet& candidate_facts, const Book& book, Backend& checker,
                     std::size_t chunk_tokens = kNliChunkTokens,
                     const TokenCounter& counter = TokenCounter::whitespace(),
                     const PromptTemplates& prompts = PromptTemplates::defaults());

/// SQuAD normalization: lowercase, drop punctuation and articles, squeeze spaces.
std::string normalize_answer(std::string_view s);
double token_f1(std::string_view prediction, std::string_view gold);
bool is_abstention(std::string_view answer);

double qa_eval(std::string_view candidate, const QaReference& reference, Backend& answerer,
               const PromptTemplates& prompts = PromptTemplates::defaults());

TextStats text_stats(std::string_view text, const TokenCounter& counter);

/// Per-description metrics. Optional fields are absent when the metric was
/// skipped (no gold, no book, or no reference QA).
struct MetricReport {
  std::string task_id;
  std::optional<PrfScore> prisma;
  std::optional<double> qa_f1;
  std::optional<double> nli;
  std::optional<PrfScore> entmention;
  std::optional<PrfScore> rouge_l;
  TextStats stats;
  std::vector<std::string> notices;
};

struct MetricBackends {
  BackendPtr judge;     // fact extraction and reference QA
  BackendPtr checker;   // entailment
  BackendPtr answerer;  // QA eval
};

struct MetricOptions {
  std::size_t nli_chunk_tokens = kNliChunkTokens;
  TokenCounter counter = TokenCounter::whitespace();
  PromptTemplates prompts = PromptTemplates::defaults();
  std::shared_ptr<const EntityExtractor> entities = std::make_shared<CapitalizedRunExtractor>();
};

MetricReport evaluate_description(std::string_view task_id, std::string_view candidate,
                                  const std::optional<std::string>& gold, const Book* book,
                                  const std::optional<QaReference>& reference_qas,
                                  const MetricBackends& backends,
                                  const MetricOptions& options = {});

/// Columns in table order: PRISMA, QA, NLI, EntMent, Rouge-L.
inline constexpr std::array<std::string_view, 5> kMetricColumns = {
    "PRISMA", "QA", "NLI", "EntMent", "Rouge-L"};

/// The F-style headline value of each column, or nullopt when skipped.
std::array<std::optional<double>, 5> headline_values(const MetricReport& report);

}  // namespace qaguide
