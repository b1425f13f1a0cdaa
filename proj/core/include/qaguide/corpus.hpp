#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qaguide {

struct Book {
  std::string id;
  std::string title;
  std::string text;
};

struct CharacterTask {
  std::string task_id;
  std::string book_id;
  std::string character;
  std::optional<std::string> gold_description;
  int target_words = 150;
};

struct Chunk {
  std::string book_id;
  std::size_t index = 0;
  std::string text;
  std::size_t token_count = 0;
};

struct CorpusStats {
  std::size_t num_books = 0;
  /// Distinct (book, character) pairs per book; a character with several
  /// descriptions counts once.
  double avg_characters_per_book = 0.0;
  std::size_t num_samples = 0;
  double avg_input_words = 0.0;
  double avg_output_words = 0.0;
};

/// Which dataset family a tasks file follows. Only affects the default
/// target length when a task omits `target_words`.
enum class CorpusStyle { kGeneric, kBookWorm, kCroSS };

int default_target_words(CorpusStyle style) noexcept;
CorpusStyle parse_corpus_style(std::string_view name);

/// Counts tokens in a text. Every counter is monotone under concatenation,
/// which the chunker relies on.
class TokenCounter {
 public:
  using External = std::function<std::size_t(std::string_view)>;

  /// Whitespace-separated words.
  static TokenCounter whitespace();
  /// ceil(bytes / ratio).
  static TokenCounter byte_ratio(std::size_t bytes_per_token);
  /// A caller-supplied tokenizer, e.g. bound to a model vocabulary.
  static TokenCounter external(std::string name, External fn);

  std::size_t count(std::string_view text) const;
  const std::string& name() const noexcept { return name_; }

 private:
  enum class Kind { kWhitespace, kByteRatio, kExternal };
  TokenCounter(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
  std::size_t ratio_ = 1;
  External external_;
};

std::size_t count_tokens(std::string_view text, const TokenCounter& counter);

std::vector<Book> load_books(const std::filesystem::path& path);
std::vector<CharacterTask> load_tasks(const std::filesystem::path& path,
                                      CorpusStyle style = CorpusStyle::kGeneric);

/// Splits `text` into chunks of at most `max_tokens` tokens. Concatenating
/// the chunk texts reproduces `text` exactly. Cuts land after a whitespace
/// run when one exists inside the window; a whitespace-free run longer than
/// the budget is cut mid-run on a UTF-8 boundary.
std::vector<Chunk> chunk_text(std::string_view text, std::size_t max_tokens,
                              const TokenCounter& counter,
                              std::string_view book_id = {});

CorpusStats dataset_stats(const std::vector<Book>& books,
                          const std::vector<CharacterTask>& tasks);

const Book& find_book(const std::vector<Book>& books, std::string_view id);

}  // namespace qaguide
