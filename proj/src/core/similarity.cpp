#include "similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace prag {

std::string_view to_string(SimilarityMetric metric) {
  return metric == SimilarityMetric::kDotProduct ? "dot_product" : "cosine";
}

SimilarityMetric similarity_metric_from_string(std::string_view s) {
  if (s == "dot_product" || s == "dot") return SimilarityMetric::kDotProduct;
  if (s == "cosine" || s == "cos") return SimilarityMetric::kCosine;
  throw ConfigError("unknown similarity metric '" + std::string(s) + "'");
}

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double similarity(SimilarityMetric metric, std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DomainError("dimension mismatch: " + std::to_string(u.size()) + " vs " +
                      std::to_string(v.size()));
  }
  const double d = dot(u, v);
  if (metric == SimilarityMetric::kDotProduct) return d;
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw DomainError("cosine similarity of a zero vector");
  return std::clamp(d / (nu * nv), -1.0, 1.0);
}

}  // namespace prag
