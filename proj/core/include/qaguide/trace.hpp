#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qaguide/corpus.hpp"

namespace qaguide {

enum class QuestionType { kRole, kRelationship, kPersonality, kEvent, kOther };

inline constexpr std::array<QuestionType, 5> kAllQuestionTypes = {
    QuestionType::kRole, QuestionType::kRelationship, QuestionType::kPersonality,
    QuestionType::kEvent, QuestionType::kOther};

std::string_view to_string(QuestionType t) noexcept;
/// Case-insensitive. Returns nullopt for labels outside the five types.
std::optional<QuestionType> parse_question_type(std::string_view label);

struct QaItem {
  std::string question;
  std::string explanation;
  std::string answer;
  QuestionType qtype = QuestionType::kOther;

  friend bool operator==(const QaItem&, const QaItem&) = default;
};

/// Which segments a trace carries. The full format is Q/E/A/T; the ablations
/// drop explanations, types, or answers.
struct TraceFormat {
  bool include_explanation = true;
  bool include_type = true;
  bool include_answer = true;

  static TraceFormat full() { return {}; }
  friend bool operator==(const TraceFormat&, const TraceFormat&) = default;
};

/// Clears the fields `format` does not carry, giving the canonical form an
/// item has after a serialize/parse round trip.
QaItem project(QaItem item, const TraceFormat& format);

/// Soft limit on answer length; longer answers are kept and flagged.
inline constexpr std::size_t kMaxAnswerWords = 8;

/// Output of parsing one chunk's model response.
struct TraceFragment {
  bool is_none = false;
  std::vector<QaItem> items;
  std::vector<std::string> warnings;
};

struct TraceProvenance {
  std::size_t chunk_index = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool sentinel = false;

  friend bool operator==(const TraceProvenance&, const TraceProvenance&) = default;
};

struct ReasoningTrace {
  std::vector<QaItem> items;
  std::vector<TraceProvenance> provenance;

  bool empty() const noexcept { return items.empty(); }
  friend bool operator==(const ReasoningTrace&, const ReasoningTrace&) = default;
};

/// A chunk's contribution before concatenation; nullopt items means the
/// reasoner answered `None` for that chunk.
struct ChunkFragment {
  std::size_t chunk_index = 0;
  std::optional<std::vector<QaItem>> items;
};

inline constexpr std::string_view kNoneSentinel = "None";

TraceFragment parse_trace(std::string_view raw, const TraceFormat& format = {});
std::string serialize_trace(const std::vector<QaItem>& items,
                            const TraceFormat& format = {});
inline std::string serialize_trace(const ReasoningTrace& trace,
                                   const TraceFormat& format = {}) {
  return serialize_trace(trace.items, format);
}

ReasoningTrace concat_traces(const std::vector<ChunkFragment>& fragments);

inline constexpr std::string_view kDefaultOpenMarker = "<think>";
inline constexpr std::string_view kDefaultCloseMarker = "</think>";

/// Wraps a serialized trace in thinking markers for use as an assistant
/// prefix. Throws kMarkerCollision if the trace contains either marker.
std::string inject_trace(std::string_view trace_text,
                         std::string_view open_marker = kDefaultOpenMarker,
                         std::string_view close_marker = kDefaultCloseMarker);

struct TextStats {
  std::size_t tokens = 0;
  double unique_unigram_pct = 0.0;
};

struct TraceStats {
  std::size_t num_qa = 0;
  std::size_t tokens = 0;
  double unique_unigram_pct = 0.0;
};

/// Percentage of distinct lowercased whitespace unigrams; 0 for empty text.
double unique_unigram_pct(std::string_view text);

TraceStats trace_stats(const ReasoningTrace& trace, const TokenCounter& counter,
                       const TraceFormat& format = {});

}  // namespace qaguide
