#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace prag {

using EmbeddingVector = std::vector<double>;

enum class SimilarityMetric { kDotProduct, kCosine };

std::string_view to_string(SimilarityMetric metric);
SimilarityMetric similarity_metric_from_string(std::string_view s);

double dot(std::span<const double> u, std::span<const double> v);
double norm(std::span<const double> v);

// Throws DomainError on a dimension mismatch or, for cosine, a zero vector.
double similarity(SimilarityMetric metric, std::span<const double> u, std::span<const double> v);

}  // namespace prag
