#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "qaguide/corpus.hpp"

namespace qaguide {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  void validate() const;
};

/// Per-book statistics the scorer needs: N, document frequencies, and the
/// mean chunk length (in BM25 tokens).
struct Bm25CorpusStats {
  std::size_t num_chunks = 0;
  std::unordered_map<std::string, std::size_t> doc_freq;
  double avg_chunk_len = 0.0;
};

/// Term view of one chunk.
struct Bm25Document {
  std::unordered_map<std::string, std::size_t> term_freq;
  std::size_t length = 0;
};

Bm25Document bm25_document(std::string_view text);
Bm25CorpusStats bm25_corpus_stats(const std::vector<Bm25Document>& docs);

/// ln((N - df + 0.5) / (df + 0.5) + 1)
double bm25_idf(std::size_t num_chunks, std::size_t doc_freq);

double bm25_score(const std::vector<std::string>& query_terms, const Bm25Document& doc,
                  const Bm25CorpusStats& stats, const Bm25Params& params = {});

/// Chunk positions ordered by descending score, ties broken by position.
std::vector<std::size_t> bm25_rank(const std::vector<std::string>& query_terms,
                                   const std::vector<Chunk>& chunks,
                                   const Bm25Params& params = {});

}  // namespace qaguide
