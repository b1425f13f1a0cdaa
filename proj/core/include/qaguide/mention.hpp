#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "qaguide/corpus.hpp"

namespace qaguide {

/// Decides which chunks mention a character. The default implementation
/// matches name aliases; a coreference frontend can be plugged in instead.
class MentionFinder {
 public:
  virtual ~MentionFinder() = default;
  /// Positions (into `chunks`) of chunks that mention `character`, ascending.
  virtual std::vector<std::size_t> find(const std::vector<Chunk>& chunks,
                                        std::string_view character) const = 0;
};

/// Full name, each name part of >= 3 characters that is not an honorific,
/// and the possessive forms of those.
std::vector<std::string> character_aliases(std::string_view character);

class AliasMentionFinder : public MentionFinder {
 public:
  std::vector<std::size_t> find(const std::vector<Chunk>& chunks,
                                std::string_view character) const override;
};

std::shared_ptr<const MentionFinder> default_mention_finder();

}  // namespace qaguide
