#include "qaguide/metrics.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <unordered_map>

#include "qaguide/error.hpp"
#include "qaguide/strategies.hpp"
#include "qaguide/text.hpp"

namespace qaguide {

// ---------------------------------------------------------------------------
// Rouge-L

std::vector<std::string> rouge_tokens(std::string_view s) { return text::alnum_tokens(s); }

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PrfScore rouge_l(std::string_view candidate, std::string_view reference) {
  const auto c = rouge_tokens(candidate);
  const auto r = rouge_tokens(reference);
  const auto l = static_cast<double>(lcs_length(c, r));
  PrfScore s;
  if (!c.empty()) s.p = l / static_cast<double>(c.size());
  if (!r.empty()) s.r = l / static_cast<double>(r.size());
  s.f = harmonic_f1(s.p, s.r);
  return s;
}

// ---------------------------------------------------------------------------
// Entity mentions

namespace {

constexpr std::array<std::string_view, 96> kSentenceInitialStoplist = {
    "the", "a", "an", "he", "she", "it", "they", "we", "you", "his", "her", "their", "its",
    "our", "my", "your", "this", "that", "these", "those", "in", "on", "at", "by", "for", "with",
    "from", "to", "of", "and", "but", "or", "as", "after", "before", "when", "while", "although",
    "though", "because", "if", "then", "there", "here", "despite", "during", "however", "is",
    "was", "are", "were", "be", "being", "been", "has", "have", "had", "does", "did", "do",
    "can", "could", "will", "would", "should", "may", "might", "must", "throughout",
    "eventually", "ultimately", "initially", "later", "also", "yet", "so", "not", "no", "one",
    "both", "each", "all", "many", "some", "even", "only", "what", "who", "where", "why", "how",
    "him", "them", "upon", "once", "over"};

bool stoplisted(std::string_view lower) {
  return std::find(kSentenceInitialStoplist.begin(), kSentenceInitialStoplist.end(), lower) !=
         kSentenceInitialStoplist.end();
}

bool is_wrapper_punct(char c) {
  return c == '"' || c == '\'' || c == '(' || c == ')' || c == '[' || c == ']' || c == '*' ||
         c == '_';
}

struct EntityToken {
  std::string word;
  bool ends_sentence = false;
  bool breaks_run = false;
};

EntityToken clean_token(std::string_view raw) {
  EntityToken t;
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && (is_wrapper_punct(raw[b]) || static_cast<unsigned char>(raw[b]) >= 0x80)) ++b;
  // Trailing punctuation and closing quotes; remember what kind it was.
  while (e > b && !text::is_ascii_alnum(raw[e - 1])) {
    char c = raw[e - 1];
    if (c == '.' || c == '!' || c == '?') t.ends_sentence = true;
    if (c == ',' || c == ';' || c == ':' || c == ')' || c == '.' || c == '!' || c == '?' ||
        c == '-' || c == '"') {
      t.breaks_run = true;
    }
    --e;
  }
  auto word = raw.substr(b, e - b);
  for (std::string_view suffix : {std::string_view("'s"), std::string_view("’s")}) {
    if (word.size() > suffix.size() && word.substr(word.size() - suffix.size()) == suffix) {
      word.remove_suffix(suffix.size());
      t.breaks_run = true;
    }
  }
  t.word = std::string(word);
  return t;
}

}  // namespace

std::set<std::string> CapitalizedRunExtractor::extract(std::string_view s) const {
  std::set<std::string> out;
  std::string run;
  auto flush = [&] {
    if (!run.empty()) out.insert(text::to_lower(run));
    run.clear();
  };
  bool sentence_start = true;
  for (auto raw : text::split_whitespace(s)) {
    auto tok = clean_token(raw);
    const auto lower = text::to_lower(tok.word);
    const bool capitalized = !tok.word.empty() && tok.word[0] >= 'A' && tok.word[0] <= 'Z';
    const bool excluded = lower == "i" || (sentence_start && stoplisted(lower));
    if (capitalized && !excluded) {
      if (!run.empty()) run += ' ';
      run += tok.word;
      if (tok.breaks_run) flush();
    } else {
      flush();
    }
    sentence_start = tok.ends_sentence;
  }
  flush();
  return out;
}

PrfScore set_prf(const std::set<std::string>& candidate, const std::set<std::string>& reference) {
  std::size_t common = 0;
  for (const auto& c : candidate) common += reference.count(c);
  PrfScore s;
  if (!candidate.empty()) s.p = static_cast<double>(common) / static_cast<double>(candidate.size());
  if (!reference.empty()) s.r = static_cast<double>(common) / static_cast<double>(reference.size());
  s.f = (candidate.empty() || reference.empty()) ? 0.0 : harmonic_f1(s.p, s.r);
  return s;
}

PrfScore entity_mention_f1(std::string_view candidate, std::string_view reference,
                           const EntityExtractor& extractor) {
  return set_prf(extractor.extract(candidate), extractor.extract(reference));
}

// ---------------------------------------------------------------------------
// Fact extraction and entailment

std::vector<std::string> parse_fact_lines(std::string_view reply) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= reply.size()) {
    auto end = reply.find('\n', start);
    if (end == std::string_view::npos) end = reply.size();
    auto line = text::trim(reply.substr(start, end - start));
    start = end + 1;
    // Bullets ("-", "*", "•") and numbering ("3." / "3)").
    if (line.rfind("•", 0) == 0) line = text::trim(line.substr(std::string_view("•").size()));
    while (!line.empty() && (line.front() == '-' || line.front() == '*')) line = text::trim(line.substr(1));
    std::size_t d = 0;
    while (d < line.size() && line[d] >= '0' && line[d] <= '9') ++d;
    if (d > 0 && d < line.size() && (line[d] == '.' || line[d] == ')')) line = text::trim(line.substr(d + 1));
    if (!line.empty()) out.emplace_back(line);
    if (end == reply.size()) break;
  }
  return out;
}

FactSet extract_facts(std::string_view description, Backend& extractor_judge, FactSource source,
                      const PromptTemplates& prompts) {
  if (text::trim(description).empty()) throw Error(ErrorKind::kValidation, "description is empty");
  auto prompt = text::substitute(prompts.fact_extraction, {{"text", std::string(description)}});
  auto result = extractor_judge.generate(make_user_request(std::move(prompt), kJudgeTemperature));
  FactSet facts;
  facts.source = source;
  facts.facts = parse_fact_lines(strip_thinking(result.text, kDefaultOpenMarker, kDefaultCloseMarker));
  return facts;
}

std::optional<double> parse_checker_score(const GenerationResult& result) {
  if (result.score) return std::clamp(*result.score, 0.0, 1.0);
  auto body = strip_thinking(result.text, kDefaultOpenMarker, kDefaultCloseMarker);
  std::string_view s = text::trim(body);
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool digit = s[i] >= '0' && s[i] <= '9';
    bool dot_digit = s[i] == '.' && i + 1 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '9';
    if (digit || dot_digit) {
      std::string num(s.substr(i, 32));
      return std::clamp(std::strtod(num.c_str(), nullptr), 0.0, 1.0);
    }
  }
  auto lower = text::to_lower(s);
  if (lower.rfind("yes", 0) == 0) return 1.0;
  if (lower.rfind("no", 0) == 0) return 0.0;
  return std::nullopt;
}

GenerationRequest entailment_request(std::string_view document, std::string_view claim,
                                     const PromptTemplates& prompts) {
  auto prompt = text::substitute(prompts.entailment, {{"document", std::string(document)},
                                                      {"claim", std::string(claim)}});
  return make_user_request(std::move(prompt), kJudgeTemperature, 16);
}

namespace {

std::vector<double> checker_scores(const std::vector<GenerationRequest>& requests, Backend& checker) {
  auto outcomes = generate_batch(requests, checker);
  std::vector<double> scores;
  scores.reserve(outcomes.size());
  for (auto& o : outcomes) {
    if (const auto* err = std::get_if<BackendError>(&o)) throw *err;
    scores.push_back(parse_checker_score(std::get<GenerationResult>(o)).value_or(0.0));
  }
  return scores;
}

}  // namespace

double entailed_fraction(const std::vector<std::string>& claims, std::string_view document,
                         Backend& checker, const PromptTemplates& prompts) {
  if (claims.empty()) return 0.0;
  std::vector<GenerationRequest> requests;
  requests.reserve(claims.size());
  for (const auto& c : claims) requests.push_back(entailment_request(document, c, prompts));
  auto scores = checker_scores(requests, checker);
  auto entailed = std::count_if(scores.begin(), scores.end(),
                                [](double v) { return v > kEntailmentThreshold; });
  return static_cast<double>(entailed) / static_cast<double>(claims.size());
}

PrismaScore prisma(std::string_view candidate, std::string_view reference, Backend& extractor_judge,
                   Backend& checker, const PromptTemplates& prompts) {
  PrismaScore s;
  s.candidate_facts = extract_facts(candidate, extractor_judge, FactSource::kGenerated, prompts);
  s.reference_facts = extract_facts(reference, extractor_judge, FactSource::kReference, prompts);
  s.prf.p = entailed_fraction(s.candidate_facts.facts, reference, checker, prompts);
  s.prf.r = entailed_fraction(s.reference_facts.facts, candidate, checker, prompts);
  s.prf.f = harmonic_f1(s.prf.p, s.prf.r);
  return s;
}

double nli_grounding(const FactSet& candidate_facts, const Book& book, Backend& checker,
                     std::size_t chunk_tokens, const TokenCounter& counter,
                     const PromptTemplates& prompts) {
  if (candidate_facts.facts.empty()) return 0.0;
  const auto chunks = chunk_text(book.text, chunk_tokens, counter, book.id);
  if (chunks.empty()) return 0.0;
  std::vector<GenerationRequest> requests;
  requests.reserve(candidate_facts.facts.size() * chunks.size());
  for (const auto& fact : candidate_facts.facts) {
    for (const auto& c : chunks) requests.push_back(entailment_request(c.text, fact, prompts));
  }
  auto scores = checker_scores(requests, checker);
  std::size_t grounded = 0;
  for (std::size_t f = 0; f < candidate_facts.facts.size(); ++f) {
    auto begin = scores.begin() + static_cast<std::ptrdiff_t>(f * chunks.size());
    double best = *std::max_element(begin, begin + static_cast<std::ptrdiff_t>(chunks.size()));
    if (best > kEntailmentThreshold) ++grounded;
  }
  return static_cast<double>(grounded) / static_cast<double>(candidate_facts.facts.size());
}

// ---------------------------------------------------------------------------
// QA-based evaluation

std::string normalize_answer(std::string_view s) {
  std::string no_punct;
  for (char c : text::to_lower(s)) {
    bool punct = (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
                 (c >= '{' && c <= '~');
    if (!punct) no_punct.push_back(c);
  }
  std::string out;
  for (auto w : text::split_whitespace(no_punct)) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

double token_f1(std::string_view prediction, std::string_view gold) {
  const auto p_norm = normalize_answer(prediction);
  const auto g_norm = normalize_answer(gold);
  const auto p = text::split_whitespace(p_norm);
  const auto g = text::split_whitespace(g_norm);
  if (p.empty() || g.empty()) return p.empty() && g.empty() ? 1.0 : 0.0;
  std::unordered_map<std::string_view, int> counts;
  for (auto t : g) ++counts[t];
  std::size_t common = 0;
  for (auto t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return harmonic_f1(precision, recall);
}

bool is_abstention(std::string_view answer) {
  auto n = normalize_answer(answer);
  return n.empty() || n == "unanswerable" || n == "no answer" || n == "none";
}

double qa_eval(std::string_view candidate, const QaReference& reference, Backend& answerer,
               const PromptTemplates& prompts) {
  if (reference.items.empty()) throw Error(ErrorKind::kEmptyReference, "reference QA set is empty");
  std::vector<GenerationRequest> requests;
  requests.reserve(reference.items.size());
  for (const auto& qa : reference.items) {
    auto prompt = text::substitute(prompts.qa_answer, {{"context", std::string(candidate)},
                                                       {"question", qa.question}});
    requests.push_back(make_user_request(std::move(prompt), kJudgeTemperature, 32));
  }
  auto outcomes = generate_batch(requests, answerer);
  double total = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (const auto* err = std::get_if<BackendError>(&outcomes[i])) throw *err;
    auto predicted = std::string(text::trim(strip_thinking(std::get<GenerationResult>(outcomes[i]).text,
                                                           kDefaultOpenMarker, kDefaultCloseMarker)));
    const auto& gold = reference.items[i].answer;
    if (is_abstention(gold)) {
      total += is_abstention(predicted) ? 1.0 : 0.0;
    } else if (!is_abstention(predicted)) {
      total += token_f1(predicted, gold);
    }
  }
  return total / static_cast<double>(reference.items.size());
}

TextStats text_stats(std::string_view s, const TokenCounter& counter) {
  return {counter.count(s), unique_unigram_pct(s)};
}

// ---------------------------------------------------------------------------
// Reports

MetricReport evaluate_description(std::string_view task_id, std::string_view candidate,
                                  const std::optional<std::string>& gold, const Book* book,
                                  const std::optional<QaReference>& reference_qas,
                                  const MetricBackends& backends, const MetricOptions& options) {
  MetricReport r;
  r.task_id = std::string(task_id);
  r.stats = text_stats(candidate, options.counter);

  std::optional<FactSet> candidate_facts;
  const bool has_gold = gold && !text::trim(*gold).empty();
  if (has_gold) {
    r.rouge_l = rouge_l(candidate, *gold);
    r.entmention = entity_mention_f1(candidate, *gold, *options.entities);
    if (backends.judge && backends.checker) {
      try {
        auto p = prisma(candidate, *gold, *backends.judge, *backends.checker, options.prompts);
        r.prisma = p.prf;
        candidate_facts = std::move(p.candidate_facts);
      } catch (const Error& e) {
        r.notices.push_back(std::string("PRISMA skipped: ") + e.what());
      }
    } else {
      r.notices.push_back("PRISMA skipped: judge or checker not configured");
    }
  } else {
    r.notices.push_back("no gold description: PRISMA, EntMent, and Rouge-L skipped");
  }

  if (book && backends.checker && backends.judge) {
    try {
      if (!candidate_facts) {
        candidate_facts = extract_facts(candidate, *backends.judge, FactSource::kGenerated, options.prompts);
      }
      r.nli = nli_grounding(*candidate_facts, *book, *backends.checker, options.nli_chunk_tokens,
                            options.counter, options.prompts);
    } catch (const Error& e) {
      r.notices.push_back(std::string("NLI skipped: ") + e.what());
    }
  } else {
    r.notices.push_back("NLI skipped: book, judge, or checker unavailable");
  }

  if (reference_qas && !reference_qas->items.empty() && backends.answerer) {
    try {
      r.qa_f1 = qa_eval(candidate, *reference_qas, *backends.answerer, options.prompts);
    } catch (const Error& e) {
      r.notices.push_back(std::string("QA skipped: ") + e.what());
    }
  } else {
    r.notices.push_back("QA skipped: no reference QA pairs or answerer");
  }
  return r;
}

std::array<std::optional<double>, 5> headline_values(const MetricReport& r) {
  std::array<std::optional<double>, 5> v;
  if (r.prisma) v[0] = r.prisma->f;
  v[1] = r.qa_f1;
  v[2] = r.nli;
  if (r.entmention) v[3] = r.entmention->f;
  if (r.rouge_l) v[4] = r.rouge_l->f;
  return v;
}

}  // namespace qaguide
