#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "qaguide/trace.hpp"

namespace qaguide {

/// Prompt templates with `{placeholder}` slots. The description and QA
/// generation templates use {context}, {character}, {book}, {length}; the
/// evaluation templates add their own slots as documented per field.
struct PromptTemplates {
  std::string description;             // {context} {character} {book} {length}
  std::string description_no_context;  // {character} {book} {length}
  std::string qa_generation;           // {context} {character} {book} {output_format}
  std::string merge;                   // {context} {character} {book} {length}
  std::string incremental_update;      // {context} {previous} {character} {book} {length}
  std::string reference_qa;            // {description} {character}
  std::string verify;                  // {evidence} {question} {answer}
  std::string fact_extraction;         // {text}
  std::string entailment;              // {document} {claim}
  std::string qa_answer;               // {context} {question}

  static PromptTemplates defaults();

  /// Defaults, overridden by `<name>.txt` files present in `dir` (e.g.
  /// description.txt, qa_generation.txt).
  static PromptTemplates load(const std::filesystem::path& dir);
};

/// "Q1: <question> E1: <explanation> A1: <answer> T1: <type>" lines for
/// the QA-generation prompt, restricted to the segments `format` carries.
std::string output_format_lines(const TraceFormat& format);

std::string render_description_prompt(const PromptTemplates& t, std::string_view context,
                                      std::string_view character, std::string_view book,
                                      int target_words);
std::string render_qa_prompt(const PromptTemplates& t, std::string_view context,
                             std::string_view character, std::string_view book,
                             const TraceFormat& format);

}  // namespace qaguide
