#include "qaguide/mention.hpp"

#include <algorithm>
#include <array>

#include "qaguide/text.hpp"

namespace qaguide {

namespace {

constexpr std::array<std::string_view, 24> kNameStopwords = {
    "mr", "mrs", "ms", "miss", "dr", "sir", "lady", "lord", "madam", "madame", "mister", "master",
    "captain", "king", "queen", "prince", "princess", "the", "of", "and", "de", "von", "van", "st"};

bool is_stopword(std::string_view lower) {
  return std::find(kNameStopwords.begin(), kNameStopwords.end(), lower) != kNameStopwords.end();
}

void push_unique(std::vector<std::string>& v, std::string s) {
  if (!s.empty() && std::find(v.begin(), v.end(), s) == v.end()) v.push_back(std::move(s));
}

}  // namespace

std::vector<std::string> character_aliases(std::string_view character) {
  std::vector<std::string> base;
  auto parts = text::split_whitespace(character);
  std::string full;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) full += ' ';
    full += parts[i];
  }
  push_unique(base, full);
  for (auto part : parts) {
    std::size_t b = 0;
    std::size_t e = part.size();
    while (b < e && !text::is_ascii_alnum(part[b])) ++b;
    while (e > b && !text::is_ascii_alnum(part[e - 1])) --e;
    auto core = part.substr(b, e - b);
    if (core.size() >= 3 && !is_stopword(text::to_lower(core))) push_unique(base, std::string(core));
  }
  std::vector<std::string> out = base;
  for (const auto& a : base) {
    push_unique(out, a + "'s");
    push_unique(out, a + "’s");
  }
  return out;
}

std::vector<std::size_t> AliasMentionFinder::find(const std::vector<Chunk>& chunks,
                                                  std::string_view character) const {
  std::vector<std::string> aliases;
  for (const auto& a : character_aliases(character)) aliases.push_back(text::to_lower(a));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    auto lower = text::to_lower(chunks[i].text);
    bool hit = std::any_of(aliases.begin(), aliases.end(),
                           [&](const std::string& a) { return text::contains_word(lower, a); });
    if (hit) out.push_back(i);
  }
  return out;
}

std::shared_ptr<const MentionFinder> default_mention_finder() {
  static const auto finder = std::make_shared<AliasMentionFinder>();
  return finder;
}

}  // namespace qaguide
