#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qaguide/bm25.hpp"
#include "qaguide/corpus.hpp"
#include "qaguide/llm.hpp"
#include "qaguide/mention.hpp"
#include "qaguide/prompts.hpp"
#include "qaguide/trace.hpp"

namespace qaguide {

enum class ContextKind { kNoContext, kLead, kBm25, kMention, kHierarchical, kIncremental };

std::string_view to_string(ContextKind kind) noexcept;
ContextKind parse_context_kind(std::string_view name);

struct ContextSpec {
  ContextKind kind = ContextKind::kBm25;
  std::size_t context_budget_tokens = 32768;
  std::size_t retrieval_chunk_tokens = 512;
  std::size_t process_chunk_tokens = 16384;

  void validate() const;
  /// Short label such as "bm25-32768" or "hierarchical-16384".
  std::string label() const;
};

enum class ReasoningMode { kNoTrace, kBuiltIn, kGuidedQa };

std::string_view to_string(ReasoningMode mode) noexcept;
ReasoningMode parse_reasoning_mode(std::string_view name);

struct Description {
  std::string task_id;
  std::string text;
  std::optional<ReasoningTrace> trace;
  std::string strategy;
  ReasoningMode mode = ReasoningMode::kNoTrace;
  TextStats stats;
  std::vector<std::string> warnings;
};

/// Backends and knobs shared by every strategy.
struct PipelineContext {
  BackendPtr generator;
  /// Required for ReasoningMode::kGuidedQa.
  BackendPtr reasoner;
  TraceFormat trace_format;
  TokenCounter counter = TokenCounter::whitespace();
  PromptTemplates prompts = PromptTemplates::defaults();
  std::string open_marker{kDefaultOpenMarker};
  std::string close_marker{kDefaultCloseMarker};
  Bm25Params bm25;
  std::shared_ptr<const MentionFinder> mentions = default_mention_finder();
  std::optional<std::int64_t> seed;
  double temperature = kDefaultTemperature;
  int max_new_tokens = 1024;
};

/// Selects the chunks a strategy puts in the prompt, in document order.
/// Hierarchical and Incremental return every processing chunk.
std::vector<Chunk> build_context(const Book& book, const CharacterTask& task,
                                 const ContextSpec& spec, const TokenCounter& counter,
                                 const Bm25Params& bm25 = {},
                                 const MentionFinder& mentions = AliasMentionFinder{});

/// Joins chunk texts; adjacent chunks are concatenated verbatim and gaps
/// between non-adjacent chunks become a blank line.
std::string join_chunks(const std::vector<Chunk>& chunks);

/// Packs consecutive chunks into windows of at most `max_tokens` for the
/// reasoner. Window indices restart at 0.
std::vector<Chunk> pack_windows(const std::vector<Chunk>& chunks, std::size_t max_tokens,
                                const TokenCounter& counter);

struct GuidedTraceResult {
  ReasoningTrace trace;
  std::vector<std::string> warnings;
};

struct GuidedTraceOptions {
  PromptTemplates prompts = PromptTemplates::defaults();
  std::optional<std::int64_t> seed;
  double temperature = kDefaultTemperature;
  int max_new_tokens = 1024;
  /// Thinking blocks the reasoner emits are removed before parsing, and
  /// items containing either marker are dropped.
  std::string open_marker{kDefaultOpenMarker};
  std::string close_marker{kDefaultCloseMarker};
};

/// Runs the reasoner once per chunk (concurrently, bounded by the backend)
/// and concatenates the fragments in chunk order. A chunk whose call fails
/// contributes the sentinel and a warning.
GuidedTraceResult guided_trace(const CharacterTask& task, std::string_view book_title,
                               const std::vector<Chunk>& chunks, Backend& reasoner,
                               const TraceFormat& format, const GuidedTraceOptions& options = {});

/// Removes the first balanced thinking block. With an unbalanced open
/// marker, keeps the text after the last open marker; with only a close
/// marker, keeps the text after it.
std::string strip_thinking(std::string_view text, std::string_view open_marker,
                           std::string_view close_marker);

/// Generates one description from a fixed context. `trace` is required for
/// kGuidedQa and ignored otherwise.
Description describe(const CharacterTask& task, std::string_view book_title,
                     const std::vector<Chunk>& context_chunks, ReasoningMode mode,
                     const PipelineContext& ctx,
                     const std::optional<ReasoningTrace>& trace = std::nullopt);

/// Stage 1 describes each processing chunk (guided traces only here);
/// stage 2 merges the intermediates without a trace.
Description hierarchical_describe(const CharacterTask& task, const Book& book,
                                  const ContextSpec& spec, ReasoningMode mode,
                                  const PipelineContext& ctx);

/// Folds chunks into a running description, one generator call per chunk.
Description incremental_describe(const CharacterTask& task, const Book& book,
                                 const ContextSpec& spec, ReasoningMode mode,
                                 const PipelineContext& ctx);

/// Dispatches on spec.kind: context selection, optional guided trace over
/// the selected context, then generation.
Description run_strategy(const CharacterTask& task, const Book& book,
                         const ContextSpec& spec, ReasoningMode mode,
                         const PipelineContext& ctx);

}  // namespace qaguide
