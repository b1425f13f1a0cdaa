#include "qaguide/mock_backend.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qaguide/text.hpp"
#include "qaguide/trace.hpp"

namespace qaguide {

namespace {

constexpr std::string_view kWildcard = "*";

bool matches(const std::string& pattern, const std::string& prompt) {
  if (pattern == kWildcard) return true;
  if (pattern.rfind("re:", 0) == 0) {
    return std::regex_search(prompt, std::regex(pattern.substr(3), std::regex::ECMAScript));
  }
  return prompt.find(pattern) != std::string::npos;
}

ErrorKind parse_fail_kind(const std::string& s) {
  if (s == "timeout") return ErrorKind::kTimeout;
  if (s == "transport") return ErrorKind::kTransport;
  if (s == "status") return ErrorKind::kHttpStatus;
  if (s == "schema") return ErrorKind::kSchema;
  if (s == "empty") return ErrorKind::kEmptyOutput;
  throw Error(ErrorKind::kParse, "unknown scripted error '" + s + "'");
}

ScriptEntry entry_from_json(const nlohmann::ordered_json& j) {
  ScriptEntry e;
  if (!j.is_object() || !j.contains("match") || !j["match"].is_string()) {
    throw Error(ErrorKind::kParse, "script entry needs a string 'match'");
  }
  e.pattern = j["match"].get<std::string>();
  if (j.contains("response")) e.responses.push_back(j["response"].get<std::string>());
  if (j.contains("responses")) {
    for (const auto& r : j["responses"]) e.responses.push_back(r.get<std::string>());
  }
  if (j.contains("error")) e.fail = parse_fail_kind(j["error"].get<std::string>());
  if (j.contains("score")) e.score = j["score"].get<double>();
  if (e.responses.empty() && !e.fail && !e.score) {
    throw Error(ErrorKind::kParse, "script entry '" + e.pattern + "' has no response");
  }
  return e;
}

}  // namespace

MockBackend::MockBackend(std::vector<ScriptEntry> script, std::string id, int max_concurrency)
    : Backend(max_concurrency), script_(std::move(script)), id_(std::move(id)) {}

std::vector<ScriptEntry> MockBackend::parse_script(std::string_view json_text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("mock script: ") + e.what());
  }
  std::vector<ScriptEntry> out;
  if (j.is_object()) {
    for (const auto& [pattern, response] : j.items()) {
      ScriptEntry e;
      e.pattern = pattern;
      if (response.is_array()) {
        for (const auto& r : response) e.responses.push_back(r.get<std::string>());
      } else {
        e.responses.push_back(response.get<std::string>());
      }
      out.push_back(std::move(e));
    }
  } else if (j.is_array()) {
    for (const auto& item : j) out.push_back(entry_from_json(item));
  } else {
    throw Error(ErrorKind::kParse, "mock script must be an object or an array");
  }
  return out;
}

std::vector<ScriptEntry> MockBackend::load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open mock script " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_script(ss.str());
}

GenerationResult MockBackend::do_generate(const GenerationRequest& request) {
  const auto prompt = request.prompt_text();
  const ScriptEntry* hit = nullptr;
  for (const auto& e : script_) {
    if (e.pattern != kWildcard && matches(e.pattern, prompt)) {
      hit = &e;
      break;
    }
  }
  if (!hit) {
    for (const auto& e : script_) {
      if (e.pattern == kWildcard) {
        hit = &e;
        break;
      }
    }
  }
  if (!hit) throw BackendError(ErrorKind::kSchema, id_ + ": no script entry matches the prompt");
  if (hit->fail) {
    throw BackendError(*hit->fail, id_ + ": scripted " + std::string(to_string(*hit->fail)) +
                                       " for pattern '" + hit->pattern + "'");
  }

  GenerationResult out;
  if (!hit->responses.empty()) {
    std::size_t pick = 0;
    if (hit->responses.size() > 1) {
      auto key = std::to_string(request.seed.value_or(0)) + '\x1f' + prompt;
      pick = text::fnv1a64(key) % hit->responses.size();
    }
    out.text = hit->responses[pick];
  }
  out.score = hit->score;
  out.backend_id = id_;
  out.prompt_tokens = approx_word_count(prompt);
  out.output_tokens = approx_word_count(out.text);
  return out;
}

// ---------------------------------------------------------------------------
// Rule backends

namespace {

// Text between the first `open` and the last `close` after it.
std::string_view between(std::string_view s, std::string_view open, std::string_view close) {
  auto b = s.find(open);
  if (b == std::string_view::npos) return {};
  b += open.size();
  auto e = s.rfind(close);
  if (e == std::string_view::npos || e < b) e = s.size();
  return s.substr(b, e - b);
}

// Rest of the line after the last occurrence of `label`.
std::string_view line_after_last(std::string_view s, std::string_view label) {
  auto b = s.rfind(label);
  if (b == std::string_view::npos) return {};
  b += label.size();
  auto e = s.find('\n', b);
  if (e == std::string_view::npos) e = s.size();
  return text::trim(s.substr(b, e - b));
}

bool contains_sequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) {
      return true;
    }
  }
  return false;
}

std::string verify_exact(const std::string& p) {
  auto evidence = between(p, "Evidence:\n", "\n\nQuestion: ");
  auto question = text::alnum_tokens(line_after_last(p, "\nQuestion: "));
  auto answer = text::alnum_tokens(line_after_last(p, "\nAnswer: "));
  const TraceFormat qa_only{false, false, true};
  auto parsed = parse_trace(evidence, qa_only);
  if (parsed.is_none) return "no";
  if (!parsed.items.empty()) {
    for (const auto& item : parsed.items) {
      if (text::alnum_tokens(item.question) == question &&
          text::alnum_tokens(item.answer) == answer) {
        return "yes";
      }
    }
    return "no";
  }
  return contains_sequence(text::alnum_tokens(evidence), answer) ? "yes" : "no";
}

GenerationResult entail_substring(const std::string& p) {
  auto document = between(p, "Document:\n", "\n\nClaim:\n");
  auto claim_start = p.rfind("\n\nClaim:\n");
  std::string_view claim;
  if (claim_start != std::string::npos) {
    std::string_view rest(p);
    rest = rest.substr(claim_start + 9);
    auto e = rest.find("\n\n");
    claim = rest.substr(0, e);
  }
  bool entailed = contains_sequence(text::alnum_tokens(document), text::alnum_tokens(claim));
  GenerationResult r;
  r.text = entailed ? "1.0" : "0.0";
  r.score = entailed ? 1.0 : 0.0;
  return r;
}

std::string split_sentences_rule(const std::string& p) {
  auto pos = p.find("Text:\n");
  std::string_view body = pos == std::string::npos ? std::string_view(p)
                                                   : std::string_view(p).substr(pos + 6);
  std::string out;
  for (const auto& s : text::split_sentences(body)) {
    if (!out.empty()) out += '\n';
    out += s;
  }
  return out;
}

constexpr std::string_view kClozePrefix = "Complete the statement: ";
constexpr std::string_view kClozeBlank = " ___";

std::string sentence_cloze(const std::string& p) {
  auto description = between(p, "Description:\n", "\n\nWrite question-answer pairs");
  std::string out;
  std::size_t n = 0;
  for (const auto& sentence : text::split_sentences(description)) {
    auto words = text::split_whitespace(sentence);
    if (words.size() < 2) continue;
    auto answer_tokens = text::alnum_tokens(words.back());
    if (answer_tokens.empty()) continue;
    std::string prefix;
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
      if (i > 0) prefix += ' ';
      prefix += words[i];
    }
    auto k = std::to_string(++n);
    if (!out.empty()) out += '\n';
    out += "Q" + k + ": " + std::string(kClozePrefix) + prefix + std::string(kClozeBlank) +
           " A" + k + ": " + answer_tokens.front();
  }
  return out.empty() ? std::string(kNoneSentinel) : out;
}

std::string cloze_lookup(const std::string& p) {
  auto context = text::alnum_tokens(between(p, "Context:\n", "\n\nQuestion: "));
  auto question = line_after_last(p, "\nQuestion: ");
  if (question.rfind(kClozePrefix, 0) != 0) return "unanswerable";
  question.remove_prefix(kClozePrefix.size());
  if (question.size() >= kClozeBlank.size() &&
      question.substr(question.size() - kClozeBlank.size()) == kClozeBlank) {
    question.remove_suffix(kClozeBlank.size());
  }
  auto prefix = text::alnum_tokens(question);
  if (prefix.empty() || prefix.size() >= context.size()) return "unanswerable";
  for (std::size_t i = 0; i + prefix.size() < context.size(); ++i) {
    if (std::equal(prefix.begin(), prefix.end(), context.begin() + static_cast<std::ptrdiff_t>(i))) {
      return context[i + prefix.size()];
    }
  }
  return "unanswerable";
}

// One judge for every judge-side prompt of the default templates.
std::string judge_rule(const std::string& p) {
  if (p.find("\n\nWrite question-answer pairs") != std::string::npos) return sentence_cloze(p);
  if (p.find("Evidence:\n") != std::string::npos) return verify_exact(p);
  if (p.find("Text:\n") != std::string::npos) return split_sentences_rule(p);
  return "no";
}

}  // namespace

std::vector<std::string> rule_backend_names() {
  return {"verify_exact", "entail_substring", "split_sentences",
          "sentence_cloze", "cloze_lookup", "abstain", "judge"};
}

BackendPtr make_rule_backend(const std::string& rule, int max_concurrency) {
  using Fn = FunctionBackend::Fn;
  auto text_rule = [](std::string (*f)(const std::string&)) -> Fn {
    return [f](const GenerationRequest& r) {
      GenerationResult out;
      out.text = f(r.prompt_text());
      return out;
    };
  };
  Fn fn;
  if (rule == "verify_exact") {
    fn = text_rule(&verify_exact);
  } else if (rule == "entail_substring") {
    fn = [](const GenerationRequest& r) { return entail_substring(r.prompt_text()); };
  } else if (rule == "split_sentences") {
    fn = text_rule(&split_sentences_rule);
  } else if (rule == "sentence_cloze") {
    fn = text_rule(&sentence_cloze);
  } else if (rule == "cloze_lookup") {
    fn = text_rule(&cloze_lookup);
  } else if (rule == "judge") {
    fn = text_rule(&judge_rule);
  } else if (rule == "abstain") {
    fn = [](const GenerationRequest&) {
      GenerationResult out;
      out.text = "unanswerable";
      return out;
    };
  } else {
    throw Error(ErrorKind::kValidation, "unknown rule backend '" + rule + "'");
  }
  return std::make_shared<FunctionBackend>("rule:" + rule, std::move(fn), max_concurrency);
}

}  // namespace qaguide
