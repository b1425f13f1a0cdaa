#include "qaguide/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qaguide/error.hpp"
#include "qaguide/text.hpp"

namespace qaguide {

void Bm25Params::validate() const {
  if (!(k1 >= 0.0)) throw Error(ErrorKind::kValidation, "bm25 k1 must be >= 0");
  if (!(b >= 0.0 && b <= 1.0)) throw Error(ErrorKind::kValidation, "bm25 b must be in [0, 1]");
}

Bm25Document bm25_document(std::string_view s) {
  Bm25Document d;
  for (auto& tok : text::alnum_tokens(s)) {
    ++d.term_freq[std::move(tok)];
    ++d.length;
  }
  return d;
}

Bm25CorpusStats bm25_corpus_stats(const std::vector<Bm25Document>& docs) {
  Bm25CorpusStats stats;
  stats.num_chunks = docs.size();
  std::size_t total = 0;
  for (const auto& d : docs) {
    total += d.length;
    for (const auto& [term, tf] : d.term_freq) ++stats.doc_freq[term];
  }
  if (!docs.empty()) stats.avg_chunk_len = static_cast<double>(total) / static_cast<double>(docs.size());
  return stats;
}

double bm25_idf(std::size_t num_chunks, std::size_t doc_freq) {
  const double n = static_cast<double>(num_chunks);
  const double df = static_cast<double>(doc_freq);
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double bm25_score(const std::vector<std::string>& query_terms, const Bm25Document& doc,
                  const Bm25CorpusStats& stats, const Bm25Params& params) {
  double score = 0.0;
  const double len_ratio =
      stats.avg_chunk_len > 0.0 ? static_cast<double>(doc.length) / stats.avg_chunk_len : 1.0;
  const double norm = params.k1 * (1.0 - params.b + params.b * len_ratio);
  for (const auto& term : query_terms) {
    auto tf_it = doc.term_freq.find(term);
    if (tf_it == doc.term_freq.end()) continue;
    auto df_it = stats.doc_freq.find(term);
    const std::size_t df = df_it == stats.doc_freq.end() ? 0 : df_it->second;
    const double tf = static_cast<double>(tf_it->second);
    score += bm25_idf(stats.num_chunks, df) * tf * (params.k1 + 1.0) / (tf + norm);
  }
  return score;
}

std::vector<std::size_t> bm25_rank(const std::vector<std::string>& query_terms,
                                   const std::vector<Chunk>& chunks, const Bm25Params& params) {
  params.validate();
  std::vector<Bm25Document> docs;
  docs.reserve(chunks.size());
  for (const auto& c : chunks) docs.push_back(bm25_document(c.text));
  const auto stats = bm25_corpus_stats(docs);

  std::vector<double> scores(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) scores[i] = bm25_score(query_terms, docs[i], stats, params);

  std::vector<std::size_t> order(chunks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace qaguide
