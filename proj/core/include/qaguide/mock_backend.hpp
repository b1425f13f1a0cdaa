#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qaguide/llm.hpp"

namespace qaguide {

/// One scripted behaviour. `pattern` is matched against the request's
/// prompt text: `*` matches anything (and is only tried after every other
/// entry), `re:<regex>` is an ECMAScript search, anything else is a
/// substring test.
struct ScriptEntry {
  std::string pattern;
  std::vector<std::string> responses;
  /// When set, the entry raises a BackendError of this kind instead.
  std::optional<ErrorKind> fail;
  std::optional<double> score;
};

/// Deterministic backend for tests and offline runs. When an entry has
/// several responses, the pick is a hash of (seed, prompt), so the same
/// request always gets the same text.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::vector<ScriptEntry> script, std::string id = "mock",
                       int max_concurrency = 1);

  /// Accepts either a JSON object {"pattern": "response", ...} (file order
  /// is kept) or an array of {"match", "response"|"responses", "error",
  /// "score"} records.
  static std::vector<ScriptEntry> load_script(const std::filesystem::path& path);
  static std::vector<ScriptEntry> parse_script(std::string_view json_text);

  std::string id() const override { return id_; }

 protected:
  GenerationResult do_generate(const GenerationRequest& request) override;

 private:
  std::vector<ScriptEntry> script_;
  std::string id_;
};

/// Built-in deterministic responders that read the default prompt layouts:
///   verify_exact      yes/no judge: exact (question, answer) match against
///                     QA evidence, or answer substring for free text
///   entail_substring  checker: 1.0 when the claim's tokens occur
///                     contiguously in the document, else 0.0
///   split_sentences   fact extractor: one sentence per fact
///   sentence_cloze    reference-QA extractor: one cloze question per sentence
///   cloze_lookup      answerer for sentence_cloze questions
///   abstain           answerer that always replies "unanswerable"
///   judge             routes reference-QA, verify, and fact prompts to the
///                     three judge rules above
BackendPtr make_rule_backend(const std::string& rule, int max_concurrency = 1);
std::vector<std::string> rule_backend_names();

}  // namespace qaguide
