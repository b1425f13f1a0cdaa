#include "qaguide/trace.hpp"

#include <unordered_set>

#include "qaguide/error.hpp"
#include "qaguide/text.hpp"

namespace qaguide {

std::string_view to_string(QuestionType t) noexcept {
  switch (t) {
    case QuestionType::kRole: return "Role";
    case QuestionType::kRelationship: return "Relationship";
    case QuestionType::kPersonality: return "Personality";
    case QuestionType::kEvent: return "Event";
    case QuestionType::kOther: return "Other";
  }
  return "Other";
}

std::optional<QuestionType> parse_question_type(std::string_view label) {
  // Tolerate decoration such as "Role." or "**Event**".
  std::size_t b = 0;
  std::size_t e = label.size();
  while (b < e && !text::is_ascii_alnum(label[b])) ++b;
  while (e > b && !text::is_ascii_alnum(label[e - 1])) --e;
  auto lower = text::to_lower(label.substr(b, e - b));
  for (auto t : kAllQuestionTypes) {
    if (lower == text::to_lower(to_string(t))) return t;
  }
  return std::nullopt;
}

QaItem project(QaItem item, const TraceFormat& format) {
  if (!format.include_explanation) item.explanation.clear();
  if (!format.include_answer) item.answer.clear();
  if (!format.include_type) item.qtype = QuestionType::kOther;
  return item;
}

namespace {

struct Marker {
  char field;
  std::size_t number;
  std::size_t start;
  std::size_t content;
};

// Markers look like Q12: / E12: / A12: / T12: and must not continue a word.
std::vector<Marker> find_markers(std::string_view raw) {
  std::vector<Marker> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c != 'Q' && c != 'E' && c != 'A' && c != 'T') continue;
    if (i > 0 && text::is_ascii_alnum(raw[i - 1])) continue;
    std::size_t j = i + 1;
    std::size_t number = 0;
    while (j < raw.size() && raw[j] >= '0' && raw[j] <= '9') {
      number = number * 10 + static_cast<std::size_t>(raw[j] - '0');
      ++j;
    }
    if (j == i + 1) continue;
    std::size_t k = j;
    while (k < raw.size() && (raw[k] == ' ' || raw[k] == '\t')) ++k;
    if (k >= raw.size() || raw[k] != ':') continue;
    out.push_back({c, number, i, k + 1});
    i = k;
  }
  return out;
}

std::string clean_segment(std::string_view s) {
  s = text::trim(s);
  while (!s.empty() && s.front() == '*') s = text::trim(s.substr(1));
  while (!s.empty() && s.back() == '*') s = text::trim(s.substr(0, s.size() - 1));
  return std::string(s);
}

struct PendingItem {
  std::size_t number = 0;
  std::optional<std::string> question;
  std::optional<std::string> explanation;
  std::optional<std::string> answer;
  std::optional<std::string> type_label;
};

void finish(PendingItem& p, const TraceFormat& format, TraceFragment& out) {
  const std::string tag = "item " + std::to_string(p.number);
  auto missing = [&](const char* what) {
    out.warnings.push_back(tag + ": missing " + std::string(what) + ", dropped");
  };
  if (!p.question || p.question->empty()) return missing("question");
  if (format.include_answer && (!p.answer || p.answer->empty())) return missing("answer");
  if (format.include_explanation && (!p.explanation || p.explanation->empty())) {
    return missing("explanation");
  }
  if (format.include_type && !p.type_label) return missing("type");

  QaItem item;
  item.question = *p.question;
  if (format.include_explanation) item.explanation = *p.explanation;
  if (format.include_answer) {
    item.answer = *p.answer;
    if (text::split_whitespace(item.answer).size() > kMaxAnswerWords) {
      out.warnings.push_back(tag + ": answer longer than " + std::to_string(kMaxAnswerWords) +
                             " words");
    }
  }
  if (format.include_type) {
    if (auto t = parse_question_type(*p.type_label)) {
      item.qtype = *t;
    } else {
      out.warnings.push_back(tag + ": unknown type '" + *p.type_label + "', using Other");
      item.qtype = QuestionType::kOther;
    }
  }
  out.items.push_back(std::move(item));
}

}  // namespace

TraceFragment parse_trace(std::string_view raw, const TraceFormat& format) {
  TraceFragment out;
  auto trimmed = text::trim(raw);
  if (trimmed == kNoneSentinel) {
    out.is_none = true;
    return out;
  }
  if (trimmed.empty()) {
    out.warnings.push_back("empty output");
    return out;
  }
  auto markers = find_markers(raw);
  if (markers.empty()) {
    out.warnings.push_back("no QA markers found in output");
    return out;
  }

  std::optional<PendingItem> current;
  for (std::size_t m = 0; m < markers.size(); ++m) {
    const auto& mk = markers[m];
    std::size_t end = m + 1 < markers.size() ? markers[m + 1].start : raw.size();
    std::string value = clean_segment(raw.substr(mk.content, end - mk.content));

    if (mk.field == 'Q') {
      if (current) finish(*current, format, out);
      current = PendingItem{};
      current->number = mk.number;
      current->question = std::move(value);
      continue;
    }
    if (!current || current->number != mk.number) {
      out.warnings.push_back(std::string(1, mk.field) + std::to_string(mk.number) +
                             " does not follow Q" + std::to_string(mk.number) + ", ignored");
      continue;
    }
    std::optional<std::string>* slot = nullptr;
    switch (mk.field) {
      case 'E': slot = &current->explanation; break;
      case 'A': slot = &current->answer; break;
      case 'T': slot = &current->type_label; break;
      default: break;
    }
    if (slot->has_value()) {
      out.warnings.push_back(std::string(1, mk.field) + std::to_string(mk.number) +
                             " repeated, keeping the first");
      continue;
    }
    *slot = std::move(value);
  }
  if (current) finish(*current, format, out);
  return out;
}

std::string serialize_trace(const std::vector<QaItem>& items, const TraceFormat& format) {
  if (items.empty()) return std::string(kNoneSentinel);
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto n = std::to_string(i + 1);
    const auto& item = items[i];
    if (i > 0) out += '\n';
    out += "Q" + n + ": " + item.question;
    if (format.include_explanation) out += " E" + n + ": " + item.explanation;
    if (format.include_answer) out += " A" + n + ": " + item.answer;
    if (format.include_type) out += " T" + n + ": " + std::string(to_string(item.qtype));
  }
  return out;
}

ReasoningTrace concat_traces(const std::vector<ChunkFragment>& fragments) {
  ReasoningTrace trace;
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    const auto& f = fragments[i];
    if (i > 0 && f.chunk_index <= fragments[i - 1].chunk_index) {
      throw Error(ErrorKind::kValidation, "chunk indices must be strictly increasing (" +
                                              std::to_string(fragments[i - 1].chunk_index) +
                                              " then " + std::to_string(f.chunk_index) + ")");
    }
    TraceProvenance p;
    p.chunk_index = f.chunk_index;
    p.begin = trace.items.size();
    p.sentinel = !f.items.has_value();
    if (f.items) trace.items.insert(trace.items.end(), f.items->begin(), f.items->end());
    p.end = trace.items.size();
    trace.provenance.push_back(p);
  }
  return trace;
}

std::string inject_trace(std::string_view trace_text, std::string_view open_marker,
                         std::string_view close_marker) {
  if (open_marker.empty() || close_marker.empty()) {
    throw Error(ErrorKind::kValidation, "thinking markers must be non-empty");
  }
  if (trace_text.find(close_marker) != std::string_view::npos) {
    throw Error(ErrorKind::kMarkerCollision,
                "trace contains the close marker '" + std::string(close_marker) + "'");
  }
  if (trace_text.find(open_marker) != std::string_view::npos) {
    throw Error(ErrorKind::kMarkerCollision,
                "trace contains the open marker '" + std::string(open_marker) + "'");
  }
  std::string out(open_marker);
  out += '\n';
  if (!trace_text.empty()) {
    out += trace_text;
    out += '\n';
  }
  out += close_marker;
  return out;
}

double unique_unigram_pct(std::string_view s) {
  auto words = text::split_whitespace(s);
  if (words.empty()) return 0.0;
  std::unordered_set<std::string> distinct;
  for (auto w : words) distinct.insert(text::to_lower(w));
  return 100.0 * static_cast<double>(distinct.size()) / static_cast<double>(words.size());
}

TraceStats trace_stats(const ReasoningTrace& trace, const TokenCounter& counter,
                       const TraceFormat& format) {
  TraceStats s;
  auto serialized = serialize_trace(trace, format);
  s.num_qa = trace.items.size();
  s.tokens = counter.count(serialized);
  s.unique_unigram_pct = trace.empty() ? 0.0 : unique_unigram_pct(serialized);
  return s;
}

}  // namespace qaguide
