#include "retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace prag {

bool ranks_before(const ScoredId& a, const ScoredId& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

DenseIndex::DenseIndex(const KnowledgeDatabase& db, const Encoder& encoder)
    : db_(db), encoder_(encoder) {
  const auto dim = encoder.dim();
  vectors_.resize(db.size() * dim);
  norms_.resize(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto v = encoder.embed_record(db.records()[i]);
    std::copy(v.begin(), v.end(), vectors_.begin() + static_cast<std::ptrdiff_t>(i * dim));
    norms_[i] = norm(v);
  }
}

std::span<const double> DenseIndex::vector(std::size_t record) const {
  const auto dim = encoder_.dim();
  return std::span<const double>(vectors_).subspan(record * dim, dim);
}

RetrievalResult DenseIndex::search(std::span<const double> query_vec, SimilarityMetric metric,
                                   std::size_t k) const {
  if (k == 0) throw DomainError("k must be >= 1");
  if (query_vec.size() != encoder_.dim()) throw DomainError("query vector dimension mismatch");
  double query_norm = 1.0;
  if (metric == SimilarityMetric::kCosine) {
    query_norm = norm(query_vec);
    if (query_norm == 0.0) throw DomainError("cosine similarity of a zero query vector");
  }

  std::vector<ScoredId> scored;
  scored.reserve(db_.size());
  for (std::size_t i = 0; i < db_.size(); ++i) {
    double s = dot(query_vec, vector(i));
    if (metric == SimilarityMetric::kCosine) {
      s = norms_[i] == 0.0 ? 0.0 : std::clamp(s / (query_norm * norms_[i]), -1.0, 1.0);
    }
    scored.push_back({db_.records()[i].id, s});
  }
  const auto take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), ranks_before);
  scored.resize(take);
  return {std::move(scored), k};
}

RetrievalResult DenseIndex::search(std::string_view question, SimilarityMetric metric,
                                   std::size_t k) const {
  return search(encoder_.embed(Role::kQuery, question), metric, k);
}

RetrievalResult retrieve_top_k(const KnowledgeDatabase& db, const Encoder& encoder,
                               SimilarityMetric metric, std::string_view question, std::size_t k) {
  if (k == 0) throw DomainError("k must be >= 1");
  return DenseIndex(db, encoder).search(question, metric, k);
}

}  // namespace prag
