#include "qaguide/reward.hpp"

#include <algorithm>

#include "qaguide/error.hpp"
#include "qaguide/strategies.hpp"
#include "qaguide/text.hpp"

namespace qaguide {

namespace {

constexpr TraceFormat kQaOnly{false, false, true};
constexpr int kVerdictTokens = 64;

}  // namespace

double harmonic_f1(double precision, double recall) noexcept {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

QaReference extract_reference_qa(std::string_view gold_description, Backend& judge,
                                 std::string_view character, const PromptTemplates& prompts) {
  if (text::trim(gold_description).empty()) {
    throw Error(ErrorKind::kValidation, "gold description is empty");
  }
  auto prompt = text::substitute(
      prompts.reference_qa,
      {{"description", std::string(gold_description)},
       {"character", character.empty() ? std::string("the character") : std::string(character)}});
  auto result = judge.generate(make_user_request(std::move(prompt), kJudgeTemperature));
  auto parsed = parse_trace(strip_thinking(result.text, kDefaultOpenMarker, kDefaultCloseMarker), kQaOnly);
  if (parsed.items.empty()) {
    throw Error(ErrorKind::kEmptyReference, "judge produced no reference QA pairs");
  }
  QaReference ref;
  ref.items = qa_pairs(parsed.items);
  return ref;
}

std::vector<QaPair> qa_pairs(const std::vector<QaItem>& items) {
  std::vector<QaPair> out;
  out.reserve(items.size());
  for (const auto& i : items) out.push_back({i.question, i.answer});
  return out;
}

std::string render_evidence(const Evidence& evidence) {
  if (const auto* s = std::get_if<std::string>(&evidence)) return *s;
  auto pairs = std::get<std::vector<QaPair>>(evidence);
  std::sort(pairs.begin(), pairs.end());
  std::vector<QaItem> items;
  items.reserve(pairs.size());
  for (auto& p : pairs) items.push_back({std::move(p.question), "", std::move(p.answer), QuestionType::kOther});
  return serialize_trace(items, kQaOnly);
}

GenerationRequest verify_request(const QaPair& qa, const Evidence& evidence,
                                 const PromptTemplates& prompts) {
  auto prompt = text::substitute(prompts.verify, {{"evidence", render_evidence(evidence)},
                                                  {"question", qa.question},
                                                  {"answer", qa.answer}});
  return make_user_request(std::move(prompt), kJudgeTemperature, kVerdictTokens);
}

VerifyResult parse_verdict(std::string_view reply) {
  auto body = strip_thinking(reply, kDefaultOpenMarker, kDefaultCloseMarker);
  std::string_view s = text::trim(body);
  std::size_t b = 0;
  while (b < s.size() && !text::is_ascii_alnum(s[b])) ++b;
  std::size_t e = b;
  while (e < s.size() && text::is_ascii_alnum(s[e])) ++e;
  auto token = text::to_lower(s.substr(b, e - b));
  if (token == "yes") return {true, {}};
  if (token == "no") return {false, {}};
  return {false, "unparseable judge verdict '" + std::string(s.substr(0, 40)) + "'"};
}

bool verify(const QaPair& qa, const Evidence& evidence, Backend& judge,
            const PromptTemplates& prompts) {
  if (const auto* s = std::get_if<std::string>(&evidence); s && text::trim(*s).empty()) {
    throw Error(ErrorKind::kValidation, "verification evidence is empty");
  }
  if (const auto* v = std::get_if<std::vector<QaPair>>(&evidence); v && v->empty()) {
    throw Error(ErrorKind::kValidation, "verification evidence is empty");
  }
  return parse_verdict(judge.generate(verify_request(qa, evidence, prompts)).text).supported;
}

RewardScore reward_score(const ReasoningTrace& trace, const QaReference& reference, Backend& judge,
                         const TraceFormat& format, const PromptTemplates& prompts) {
  if (!format.include_answer) {
    throw Error(ErrorKind::kMissingAnswers, "traces without answers cannot be reward-scored");
  }
  if (std::any_of(trace.items.begin(), trace.items.end(),
                  [](const QaItem& i) { return text::trim(i.answer).empty(); })) {
    throw Error(ErrorKind::kMissingAnswers, "trace contains items without answers");
  }
  if (reference.items.empty()) {
    throw Error(ErrorKind::kEmptyReference, "reference QA set is empty");
  }

  RewardScore score;
  score.num_generated = trace.items.size();
  score.num_reference = reference.items.size();
  if (trace.items.empty()) return score;

  const auto generated = qa_pairs(trace.items);
  const Evidence ref_evidence = reference.items;
  const Evidence gen_evidence = generated;
  std::vector<GenerationRequest> requests;
  requests.reserve(generated.size() + reference.items.size());
  for (const auto& qa : generated) requests.push_back(verify_request(qa, ref_evidence, prompts));
  for (const auto& qa : reference.items) requests.push_back(verify_request(qa, gen_evidence, prompts));

  auto outcomes = generate_batch(requests, judge);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (const auto* err = std::get_if<BackendError>(&outcomes[i])) throw *err;
    auto verdict = parse_verdict(std::get<GenerationResult>(outcomes[i]).text);
    if (!verdict.warning.empty()) score.warnings.push_back(verdict.warning);
    if (!verdict.supported) continue;
    if (i < generated.size()) {
      ++score.verified_generated;
    } else {
      ++score.verified_reference;
    }
  }
  score.precision = static_cast<double>(score.verified_generated) / static_cast<double>(score.num_generated);
  score.recall = static_cast<double>(score.verified_reference) / static_cast<double>(score.num_reference);
  score.f1 = harmonic_f1(score.precision, score.recall);
  return score;
}

}  // namespace qaguide
