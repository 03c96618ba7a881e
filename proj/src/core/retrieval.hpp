#pragma once

#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "embedding.hpp"
#include "similarity.hpp"

namespace prag {

struct ScoredId {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredId&) const = default;
};

// Entries sorted by score descending, ties by ascending id.
struct RetrievalResult {
  std::vector<ScoredId> entries;
  std::size_t k = 0;

  bool operator==(const RetrievalResult&) const = default;
};

// Ordering used for every ranked list: higher score first, then smaller id.
bool ranks_before(const ScoredId& a, const ScoredId& b);

/// Embeddings of every record in a snapshot, computed once.
///
/// Search is an exact scan. Under cosine, records whose text embeds to the
/// zero vector score 0.
class DenseIndex {
 public:
  DenseIndex(const KnowledgeDatabase& db, const Encoder& encoder);

  const KnowledgeDatabase& db() const { return db_; }
  const Encoder& encoder() const { return encoder_; }
  std::span<const double> vector(std::size_t record) const;

  RetrievalResult search(std::span<const double> query_vec, SimilarityMetric metric,
                         std::size_t k) const;
  RetrievalResult search(std::string_view question, SimilarityMetric metric, std::size_t k) const;

 private:
  KnowledgeDatabase db_;
  Encoder encoder_;
  std::vector<double> vectors_;  // size() * dim, row-major
  std::vector<double> norms_;
};

// Throws DomainError when k == 0.
RetrievalResult retrieve_top_k(const KnowledgeDatabase& db, const Encoder& encoder,
                               SimilarityMetric metric, std::string_view question, std::size_t k);

}  // namespace prag
