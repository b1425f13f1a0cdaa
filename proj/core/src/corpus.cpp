#include "qaguide/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "qaguide/error.hpp"
#include "qaguide/text.hpp"

namespace qaguide {

using nlohmann::json;

int default_target_words(CorpusStyle style) noexcept {
  switch (style) {
    case CorpusStyle::kBookWorm: return 89;
    case CorpusStyle::kCroSS: return 295;
    case CorpusStyle::kGeneric: break;
  }
  return 150;
}

CorpusStyle parse_corpus_style(std::string_view name) {
  auto lower = text::to_lower(name);
  if (lower == "bookworm") return CorpusStyle::kBookWorm;
  if (lower == "cross") return CorpusStyle::kCroSS;
  if (lower == "generic" || lower.empty()) return CorpusStyle::kGeneric;
  throw Error(ErrorKind::kValidation, "unknown corpus style '" + std::string(name) + "'");
}

TokenCounter TokenCounter::whitespace() { return TokenCounter(Kind::kWhitespace, "whitespace"); }

TokenCounter TokenCounter::byte_ratio(std::size_t bytes_per_token) {
  if (bytes_per_token == 0) {
    throw Error(ErrorKind::kValidation, "byte counter ratio must be positive");
  }
  TokenCounter c(Kind::kByteRatio, "bytes/" + std::to_string(bytes_per_token));
  c.ratio_ = bytes_per_token;
  return c;
}

TokenCounter TokenCounter::external(std::string name, External fn) {
  if (!fn) throw Error(ErrorKind::kValidation, "external token counter is empty");
  TokenCounter c(Kind::kExternal, std::move(name));
  c.external_ = std::move(fn);
  return c;
}

std::size_t TokenCounter::count(std::string_view text) const {
  switch (kind_) {
    case Kind::kWhitespace: {
      std::size_t n = 0;
      bool in_word = false;
      for (char c : text) {
        bool space = text::is_space(c);
        if (!space && !in_word) ++n;
        in_word = !space;
      }
      return n;
    }
    case Kind::kByteRatio:
      return (text.size() + ratio_ - 1) / ratio_;
    case Kind::kExternal:
      return external_(text);
  }
  return 0;
}

std::size_t count_tokens(std::string_view text, const TokenCounter& counter) {
  return counter.count(text);
}

namespace {

std::vector<json> read_records(const std::filesystem::path& path,
                               std::vector<std::size_t>& line_numbers) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kParse, path.string() + ":" + std::to_string(lineno) +
                                         ": malformed record: " + e.what());
    }
    if (!j.is_object()) {
      throw Error(ErrorKind::kParse,
                  path.string() + ":" + std::to_string(lineno) + ": record is not an object");
    }
    out.push_back(std::move(j));
    line_numbers.push_back(lineno);
  }
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::string required_string(const json& j, const char* field, const std::filesystem::path& path,
                            std::size_t line, bool allow_empty = false) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorKind::kParse,
                where(path, line) + ": missing or non-string field '" + field + "'");
  }
  auto s = it->get<std::string>();
  if (!allow_empty && s.empty()) {
    throw Error(ErrorKind::kParse, where(path, line) + ": empty field '" + field + "'");
  }
  return s;
}

}  // namespace

std::vector<Book> load_books(const std::filesystem::path& path) {
  std::vector<std::size_t> lines;
  auto records = read_records(path, lines);
  std::vector<Book> books;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    Book b;
    b.id = required_string(records[i], "id", path, lines[i]);
    b.title = required_string(records[i], "title", path, lines[i], true);
    b.text = required_string(records[i], "text", path, lines[i]);
    if (!seen.insert(b.id).second) {
      throw Error(ErrorKind::kDuplicateId,
                  where(path, lines[i]) + ": duplicate book id '" + b.id + "'");
    }
    books.push_back(std::move(b));
  }
  return books;
}

std::vector<CharacterTask> load_tasks(const std::filesystem::path& path, CorpusStyle style) {
  std::vector<std::size_t> lines;
  auto records = read_records(path, lines);
  std::vector<CharacterTask> tasks;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    CharacterTask t;
    t.task_id = required_string(r, "task_id", path, lines[i]);
    t.book_id = required_string(r, "book_id", path, lines[i]);
    t.character = required_string(r, "character", path, lines[i]);
    if (auto it = r.find("gold_description"); it != r.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw Error(ErrorKind::kParse, where(path, lines[i]) + ": gold_description must be a string");
      }
      t.gold_description = it->get<std::string>();
    }
    t.target_words = default_target_words(style);
    if (auto it = r.find("target_words"); it != r.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<long long>() < 1) {
        throw Error(ErrorKind::kParse,
                    where(path, lines[i]) + ": target_words must be a positive integer");
      }
      t.target_words = it->get<int>();
    }
    if (!seen.insert(t.task_id).second) {
      throw Error(ErrorKind::kDuplicateId,
                  where(path, lines[i]) + ": duplicate task id '" + t.task_id + "'");
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::vector<Chunk> chunk_text(std::string_view text, std::size_t max_tokens,
                              const TokenCounter& counter, std::string_view book_id) {
  if (max_tokens == 0) throw Error(ErrorKind::kValidation, "max_tokens must be positive");
  std::vector<Chunk> chunks;
  if (text.empty()) return chunks;

  // Cut candidates: the start of every word that follows whitespace, plus the end.
  std::vector<std::size_t> cuts;
  for (std::size_t i = 1; i < text.size(); ++i) {
    if (text::is_space(text[i - 1]) && !text::is_space(text[i])) cuts.push_back(i);
  }
  cuts.push_back(text.size());

  auto fits = [&](std::size_t start, std::size_t end) {
    return counter.count(text.substr(start, end - start)) <= max_tokens;
  };

  std::size_t start = 0;
  auto next_cut = cuts.begin();
  while (start < text.size()) {
    next_cut = std::upper_bound(next_cut, cuts.end(), start);
    std::size_t j0 = static_cast<std::size_t>(next_cut - cuts.begin());
    std::size_t end = 0;
    if (fits(start, cuts[j0])) {
      // Gallop, then bisect, for the last cut that still fits.
      std::size_t lo = j0;
      std::size_t step = 1;
      std::size_t hi = lo + step;
      while (hi < cuts.size() && fits(start, cuts[hi])) {
        lo = hi;
        step *= 2;
        hi = lo + step;
      }
      hi = std::min(hi, cuts.size());
      while (hi - lo > 1) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (fits(start, cuts[mid])) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      end = cuts[lo];
    } else {
      // A whitespace-free run overflows the budget on its own: cut inside it.
      std::size_t lo = start;
      std::size_t hi = cuts[j0];
      while (hi - lo > 1) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (fits(start, mid)) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      end = text::utf8_floor(text, lo);
      if (end <= start) {
        // Not even one code point fits; emit it alone to make progress.
        end = start + 1;
        while (end < text.size() && (static_cast<unsigned char>(text[end]) & 0xC0) == 0x80) ++end;
      }
    }
    Chunk c;
    c.book_id = std::string(book_id);
    c.index = chunks.size();
    c.text = std::string(text.substr(start, end - start));
    c.token_count = counter.count(c.text);
    chunks.push_back(std::move(c));
    start = end;
  }
  return chunks;
}

CorpusStats dataset_stats(const std::vector<Book>& books, const std::vector<CharacterTask>& tasks) {
  std::unordered_map<std::string, const Book*> by_id;
  for (const auto& b : books) by_id.emplace(b.id, &b);
  const auto counter = TokenCounter::whitespace();

  CorpusStats stats;
  std::set<std::string> used;
  std::set<std::pair<std::string, std::string>> characters;
  double input_words = 0.0;
  double output_words = 0.0;
  std::size_t with_gold = 0;
  for (const auto& t : tasks) {
    auto it = by_id.find(t.book_id);
    if (it == by_id.end()) {
      throw Error(ErrorKind::kDanglingReference,
                  "task '" + t.task_id + "' references unknown book '" + t.book_id + "'");
    }
    used.insert(t.book_id);
    characters.emplace(t.book_id, text::to_lower(text::trim(t.character)));
    input_words += static_cast<double>(counter.count(it->second->text));
    if (t.gold_description) {
      output_words += static_cast<double>(counter.count(*t.gold_description));
      ++with_gold;
    }
  }
  stats.num_books = used.size();
  stats.num_samples = tasks.size();
  if (stats.num_books > 0) {
    stats.avg_characters_per_book =
        static_cast<double>(characters.size()) / static_cast<double>(stats.num_books);
  }
  if (!tasks.empty()) stats.avg_input_words = input_words / static_cast<double>(tasks.size());
  if (with_gold > 0) stats.avg_output_words = output_words / static_cast<double>(with_gold);
  return stats;
}

const Book& find_book(const std::vector<Book>& books, std::string_view id) {
  for (const auto& b : books) {
    if (b.id == id) return b;
  }
  throw Error(ErrorKind::kDanglingReference, "unknown book '" + std::string(id) + "'");
}

}  // namespace qaguide
