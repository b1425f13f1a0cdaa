#include "qaguide/strategies.hpp"

#include <algorithm>

#include "qaguide/error.hpp"
#include "qaguide/text.hpp"

namespace qaguide {

std::string_view to_string(ContextKind kind) noexcept {
  switch (kind) {
    case ContextKind::kNoContext: return "nocontext";
    case ContextKind::kLead: return "lead";
    case ContextKind::kBm25: return "bm25";
    case ContextKind::kMention: return "mention";
    case ContextKind::kHierarchical: return "hierarchical";
    case ContextKind::kIncremental: return "incremental";
  }
  return "unknown";
}

ContextKind parse_context_kind(std::string_view name) {
  auto lower = text::to_lower(name);
  if (lower == "nocontext" || lower == "no_context" || lower == "none") return ContextKind::kNoContext;
  if (lower == "lead") return ContextKind::kLead;
  if (lower == "bm25") return ContextKind::kBm25;
  if (lower == "mention" || lower == "coref") return ContextKind::kMention;
  if (lower == "hierarchical") return ContextKind::kHierarchical;
  if (lower == "incremental") return ContextKind::kIncremental;
  throw Error(ErrorKind::kValidation, "unknown strategy '" + std::string(name) + "'");
}

std::string_view to_string(ReasoningMode mode) noexcept {
  switch (mode) {
    case ReasoningMode::kNoTrace: return "no_trace";
    case ReasoningMode::kBuiltIn: return "built_in";
    case ReasoningMode::kGuidedQa: return "guided_qa";
  }
  return "unknown";
}

ReasoningMode parse_reasoning_mode(std::string_view name) {
  auto lower = text::to_lower(name);
  std::replace(lower.begin(), lower.end(), '-', '_');
  if (lower == "no_trace" || lower == "none") return ReasoningMode::kNoTrace;
  if (lower == "built_in" || lower == "builtin") return ReasoningMode::kBuiltIn;
  if (lower == "guided_qa" || lower == "guided") return ReasoningMode::kGuidedQa;
  throw Error(ErrorKind::kValidation, "unknown reasoning mode '" + std::string(name) + "'");
}

void ContextSpec::validate() const {
  if (context_budget_tokens == 0 || retrieval_chunk_tokens == 0 || process_chunk_tokens == 0) {
    throw Error(ErrorKind::kValidation, "token budgets and chunk sizes must be positive");
  }
  switch (kind) {
    case ContextKind::kLead:
    case ContextKind::kBm25:
    case ContextKind::kMention:
      if (context_budget_tokens < retrieval_chunk_tokens) {
        throw Error(ErrorKind::kValidation, "context budget is smaller than the retrieval chunk");
      }
      break;
    case ContextKind::kHierarchical:
    case ContextKind::kIncremental:
      if (context_budget_tokens < process_chunk_tokens) {
        throw Error(ErrorKind::kValidation, "context budget is smaller than the processing chunk");
      }
      break;
    case ContextKind::kNoContext:
      break;
  }
}

std::string ContextSpec::label() const {
  std::string out(to_string(kind));
  switch (kind) {
    case ContextKind::kLead:
    case ContextKind::kBm25:
    case ContextKind::kMention:
      return out + "-" + std::to_string(context_budget_tokens);
    case ContextKind::kHierarchical:
    case ContextKind::kIncremental:
      return out + "-" + std::to_string(process_chunk_tokens);
    case ContextKind::kNoContext:
      break;
  }
  return out;
}

namespace {

// Takes chunks in the given order until the next one would overflow.
std::vector<Chunk> take_within_budget(const std::vector<Chunk>& chunks,
                                      const std::vector<std::size_t>& order, std::size_t budget) {
  std::vector<Chunk> out;
  std::size_t used = 0;
  for (auto i : order) {
    if (used + chunks[i].token_count > budget) break;
    used += chunks[i].token_count;
    out.push_back(chunks[i]);
  }
  std::sort(out.begin(), out.end(), [](const Chunk& a, const Chunk& b) { return a.index < b.index; });
  return out;
}

}  // namespace

std::vector<Chunk> build_context(const Book& book, const CharacterTask& task,
                                 const ContextSpec& spec, const TokenCounter& counter,
                                 const Bm25Params& bm25, const MentionFinder& mentions) {
  spec.validate();
  if (spec.kind == ContextKind::kNoContext) return {};
  if (book.text.empty()) {
    throw Error(ErrorKind::kValidation, "book '" + book.id + "' has no text");
  }
  if (spec.kind == ContextKind::kHierarchical || spec.kind == ContextKind::kIncremental) {
    return chunk_text(book.text, spec.process_chunk_tokens, counter, book.id);
  }

  auto chunks = chunk_text(book.text, spec.retrieval_chunk_tokens, counter, book.id);
  std::vector<std::size_t> order;
  switch (spec.kind) {
    case ContextKind::kLead:
      for (std::size_t i = 0; i < chunks.size(); ++i) order.push_back(i);
      break;
    case ContextKind::kBm25:
      order = bm25_rank(text::alnum_tokens(task.character), chunks, bm25);
      break;
    case ContextKind::kMention:
      order = mentions.find(chunks, task.character);
      break;
    default:
      break;
  }
  return take_within_budget(chunks, order, spec.context_budget_tokens);
}

std::string join_chunks(const std::vector<Chunk>& chunks) {
  std::string out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (i > 0 && chunks[i].index != chunks[i - 1].index + 1) {
      while (!out.empty() && text::is_space(out.back())) out.pop_back();
      out += "\n\n";
    }
    out += chunks[i].text;
  }
  return out;
}

std::vector<Chunk> pack_windows(const std::vector<Chunk>& chunks, std::size_t max_tokens,
                                const TokenCounter& counter) {
  std::vector<Chunk> windows;
  std::vector<Chunk> current;
  auto flush = [&] {
    if (current.empty()) return;
    Chunk w;
    w.book_id = current.front().book_id;
    w.index = windows.size();
    w.text = join_chunks(current);
    w.token_count = counter.count(w.text);
    windows.push_back(std::move(w));
    current.clear();
  };
  for (const auto& c : chunks) {
    current.push_back(c);
    if (current.size() > 1 && counter.count(join_chunks(current)) > max_tokens) {
      current.pop_back();
      flush();
      current.push_back(c);
    }
  }
  flush();
  return windows;
}

std::string strip_thinking(std::string_view s, std::string_view open_marker,
                           std::string_view close_marker) {
  auto open = s.find(open_marker);
  if (open != std::string_view::npos) {
    auto close = s.find(close_marker, open + open_marker.size());
    if (close != std::string_view::npos) {
      return std::string(s.substr(0, open)) + std::string(s.substr(close + close_marker.size()));
    }
    return std::string(s.substr(s.rfind(open_marker) + open_marker.size()));
  }
  auto close = s.rfind(close_marker);
  if (close != std::string_view::npos) return std::string(s.substr(close + close_marker.size()));
  return std::string(s);
}

GuidedTraceResult guided_trace(const CharacterTask& task, std::string_view book_title,
                               const std::vector<Chunk>& chunks, Backend& reasoner,
                               const TraceFormat& format, const GuidedTraceOptions& options) {
  if (chunks.empty()) throw Error(ErrorKind::kValidation, "guided trace needs at least one chunk");
  std::vector<GenerationRequest> requests;
  requests.reserve(chunks.size());
  for (const auto& c : chunks) {
    auto r = make_user_request(render_qa_prompt(options.prompts, c.text, task.character, book_title, format),
                               options.temperature, options.max_new_tokens);
    r.seed = options.seed;
    requests.push_back(std::move(r));
  }
  auto outcomes = generate_batch(requests, reasoner);

  GuidedTraceResult out;
  std::vector<ChunkFragment> fragments;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto tag = "chunk " + std::to_string(chunks[i].index) + ": ";
    ChunkFragment f;
    f.chunk_index = chunks[i].index;
    if (const auto* err = std::get_if<BackendError>(&outcomes[i])) {
      out.warnings.push_back(tag + "reasoner failed (" + err->what() + "), treated as None");
      fragments.push_back(std::move(f));
      continue;
    }
    const auto& raw = std::get<GenerationResult>(outcomes[i]).text;
    auto parsed = parse_trace(strip_thinking(raw, options.open_marker, options.close_marker), format);
    for (auto& w : parsed.warnings) out.warnings.push_back(tag + w);
    if (!parsed.is_none) {
      std::vector<QaItem> items;
      for (auto& item : parsed.items) {
        auto has_marker = [&](const std::string& s) {
          return s.find(options.open_marker) != std::string::npos ||
                 s.find(options.close_marker) != std::string::npos;
        };
        if (has_marker(item.question) || has_marker(item.explanation) || has_marker(item.answer)) {
          out.warnings.push_back(tag + "item contains a thinking marker, dropped");
          continue;
        }
        items.push_back(std::move(item));
      }
      f.items = std::move(items);
    }
    fragments.push_back(std::move(f));
  }
  out.trace = concat_traces(fragments);
  return out;
}

namespace {

GuidedTraceOptions trace_options(const PipelineContext& ctx) {
  GuidedTraceOptions o;
  o.prompts = ctx.prompts;
  o.seed = ctx.seed;
  o.temperature = ctx.temperature;
  o.max_new_tokens = ctx.max_new_tokens;
  o.open_marker = ctx.open_marker;
  o.close_marker = ctx.close_marker;
  return o;
}

// Items of `trace` that came from chunk `chunk_index`.
std::vector<QaItem> slice_for_chunk(const ReasoningTrace& trace, std::size_t chunk_index) {
  for (const auto& p : trace.provenance) {
    if (p.chunk_index == chunk_index) {
      return {trace.items.begin() + static_cast<std::ptrdiff_t>(p.begin),
              trace.items.begin() + static_cast<std::ptrdiff_t>(p.end)};
    }
  }
  return {};
}

GenerationRequest generation_request(std::string prompt, ReasoningMode mode,
                                     const PipelineContext& ctx,
                                     const std::vector<QaItem>* trace_items) {
  auto r = make_user_request(std::move(prompt), ctx.temperature, ctx.max_new_tokens);
  r.seed = ctx.seed;
  switch (mode) {
    case ReasoningMode::kNoTrace:
      r.assistant_prefix = inject_trace("", ctx.open_marker, ctx.close_marker);
      break;
    case ReasoningMode::kGuidedQa:
      r.assistant_prefix = inject_trace(
          trace_items ? serialize_trace(*trace_items, ctx.trace_format) : std::string(),
          ctx.open_marker, ctx.close_marker);
      break;
    case ReasoningMode::kBuiltIn:
      break;
  }
  return r;
}

std::string finish_text(const GenerationResult& result, ReasoningMode mode,
                        const PipelineContext& ctx) {
  std::string out = mode == ReasoningMode::kBuiltIn
                        ? strip_thinking(result.text, ctx.open_marker, ctx.close_marker)
                        : result.text;
  auto trimmed = text::trim(out);
  if (trimmed.empty()) throw Error(ErrorKind::kEmptyOutput, "generator returned an empty description");
  return std::string(trimmed);
}

Description make_description(const CharacterTask& task, std::string text, ReasoningMode mode,
                             const PipelineContext& ctx) {
  Description d;
  d.task_id = task.task_id;
  d.mode = mode;
  d.stats.tokens = ctx.counter.count(text);
  d.stats.unique_unigram_pct = unique_unigram_pct(text);
  d.text = std::move(text);
  return d;
}

void require_backends(ReasoningMode mode, const PipelineContext& ctx) {
  if (!ctx.generator) throw Error(ErrorKind::kValidation, "no generator backend configured");
  if (mode == ReasoningMode::kGuidedQa && !ctx.reasoner) {
    throw Error(ErrorKind::kValidation, "guided-QA mode needs a reasoner backend");
  }
}

// Runs the reasoner over `chunks` when the mode asks for a trace.
std::optional<GuidedTraceResult> maybe_trace(const CharacterTask& task, std::string_view title,
                                             const std::vector<Chunk>& chunks, ReasoningMode mode,
                                             const PipelineContext& ctx) {
  if (mode != ReasoningMode::kGuidedQa) return std::nullopt;
  if (chunks.empty()) return GuidedTraceResult{};
  return guided_trace(task, title, chunks, *ctx.reasoner, ctx.trace_format, trace_options(ctx));
}

}  // namespace

Description describe(const CharacterTask& task, std::string_view book_title,
                     const std::vector<Chunk>& context_chunks, ReasoningMode mode,
                     const PipelineContext& ctx, const std::optional<ReasoningTrace>& trace) {
  require_backends(ReasoningMode::kNoTrace, ctx);
  if (mode == ReasoningMode::kGuidedQa && !trace) {
    throw Error(ErrorKind::kValidation, "guided-QA describe needs a trace");
  }
  auto prompt = render_description_prompt(ctx.prompts, join_chunks(context_chunks), task.character,
                                          book_title, task.target_words);
  auto request = generation_request(std::move(prompt), mode, ctx, trace ? &trace->items : nullptr);
  auto result = ctx.generator->generate(request);
  auto d = make_description(task, finish_text(result, mode, ctx), mode, ctx);
  if (mode == ReasoningMode::kGuidedQa) d.trace = trace;
  return d;
}

Description hierarchical_describe(const CharacterTask& task, const Book& book,
                                  const ContextSpec& spec, ReasoningMode mode,
                                  const PipelineContext& ctx) {
  require_backends(mode, ctx);
  ContextSpec hs = spec;
  hs.kind = ContextKind::kHierarchical;
  auto chunks = build_context(book, task, hs, ctx.counter, ctx.bm25, *ctx.mentions);

  std::vector<std::string> warnings;
  auto traced = maybe_trace(task, book.title, chunks, mode, ctx);
  if (traced) warnings = traced->warnings;

  std::vector<GenerationRequest> stage1;
  std::vector<std::vector<QaItem>> slices(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (traced) slices[i] = slice_for_chunk(traced->trace, chunks[i].index);
    auto prompt = render_description_prompt(ctx.prompts, chunks[i].text, task.character, book.title,
                                            task.target_words);
    stage1.push_back(generation_request(std::move(prompt), mode, ctx, traced ? &slices[i] : nullptr));
  }
  auto outcomes = generate_batch(stage1, *ctx.generator);

  std::vector<std::string> intermediates;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto tag = "chunk " + std::to_string(chunks[i].index) + ": ";
    if (const auto* err = std::get_if<BackendError>(&outcomes[i])) {
      warnings.push_back(tag + "intermediate description failed (" + err->what() + "), omitted");
      continue;
    }
    try {
      intermediates.push_back(finish_text(std::get<GenerationResult>(outcomes[i]), mode, ctx));
    } catch (const Error& e) {
      warnings.push_back(tag + e.what() + ", omitted");
    }
  }
  if (intermediates.empty()) {
    throw Error(ErrorKind::kEmptyOutput, "every intermediate description failed");
  }

  std::string joined;
  for (std::size_t i = 0; i < intermediates.size(); ++i) {
    if (i > 0) joined += "\n\n";
    joined += "Description " + std::to_string(i + 1) + ": " + intermediates[i];
  }
  auto merge_prompt = text::substitute(ctx.prompts.merge, {{"context", joined},
                                                           {"character", task.character},
                                                           {"book", book.title},
                                                           {"length", std::to_string(task.target_words)}});
  // The merge stage never sees a trace.
  const auto merge_mode = mode == ReasoningMode::kGuidedQa ? ReasoningMode::kNoTrace : mode;
  auto merged = ctx.generator->generate(generation_request(std::move(merge_prompt), merge_mode, ctx, nullptr));

  auto d = make_description(task, finish_text(merged, mode, ctx), mode, ctx);
  if (traced) d.trace = std::move(traced->trace);
  d.strategy = hs.label();
  d.warnings = std::move(warnings);
  return d;
}

Description incremental_describe(const CharacterTask& task, const Book& book,
                                 const ContextSpec& spec, ReasoningMode mode,
                                 const PipelineContext& ctx) {
  require_backends(mode, ctx);
  ContextSpec is = spec;
  is.kind = ContextKind::kIncremental;
  auto chunks = build_context(book, task, is, ctx.counter, ctx.bm25, *ctx.mentions);

  std::vector<std::string> warnings;
  auto traced = maybe_trace(task, book.title, chunks, mode, ctx);
  if (traced) warnings = traced->warnings;

  std::string running;
  for (const auto& chunk : chunks) {
    std::string prompt;
    if (running.empty()) {
      prompt = render_description_prompt(ctx.prompts, chunk.text, task.character, book.title,
                                         task.target_words);
    } else {
      prompt = text::substitute(ctx.prompts.incremental_update,
                                {{"context", chunk.text},
                                 {"previous", running},
                                 {"character", task.character},
                                 {"book", book.title},
                                 {"length", std::to_string(task.target_words)}});
    }
    std::vector<QaItem> slice;
    if (traced) slice = slice_for_chunk(traced->trace, chunk.index);
    try {
      auto result = ctx.generator->generate(
          generation_request(std::move(prompt), mode, ctx, traced ? &slice : nullptr));
      running = finish_text(result, mode, ctx);
    } catch (const Error& e) {
      warnings.push_back("chunk " + std::to_string(chunk.index) + ": update failed (" + e.what() +
                         "), keeping the previous description");
    }
  }
  if (running.empty()) throw Error(ErrorKind::kEmptyOutput, "every incremental step failed");

  auto d = make_description(task, std::move(running), mode, ctx);
  if (traced) d.trace = std::move(traced->trace);
  d.strategy = is.label();
  d.warnings = std::move(warnings);
  return d;
}

Description run_strategy(const CharacterTask& task, const Book& book, const ContextSpec& spec,
                         ReasoningMode mode, const PipelineContext& ctx) {
  require_backends(mode, ctx);
  if (spec.kind == ContextKind::kHierarchical) return hierarchical_describe(task, book, spec, mode, ctx);
  if (spec.kind == ContextKind::kIncremental) return incremental_describe(task, book, spec, mode, ctx);

  auto chunks = build_context(book, task, spec, ctx.counter, ctx.bm25, *ctx.mentions);
  std::optional<GuidedTraceResult> traced;
  if (mode == ReasoningMode::kGuidedQa) {
    traced = maybe_trace(task, book.title, pack_windows(chunks, spec.process_chunk_tokens, ctx.counter),
                         mode, ctx);
  }
  std::optional<ReasoningTrace> trace;
  if (traced) trace = traced->trace;
  auto d = describe(task, book.title, chunks, mode, ctx, trace);
  d.strategy = spec.label();
  if (traced) d.warnings = std::move(traced->warnings);
  return d;
}

}  // namespace qaguide
