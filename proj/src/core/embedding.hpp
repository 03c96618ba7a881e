#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "similarity.hpp"

namespace prag {

enum class EncoderKind { kFeatureHash, kLinearTable, kPrecomputed };
enum class Role { kQuery, kText };

std::string_view to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(std::string_view s);

/// The encoder pair (f_Q, f_T).
///
/// Both reference encoders share parameters between the query and text
/// roles. `feature_hash` maps every token to a signed one-hot coordinate and
/// sums; `linear_table` mean-pools per-token vectors generated from a seeded
/// hash of the token, which makes single-token swaps exactly linear and gives
/// the white-box optimizer closed-form deltas. `precomputed` looks vectors up
/// by key: record id for corpus texts, the raw question string for queries.
class Encoder {
 public:
  static Encoder feature_hash(std::size_t dim, std::uint64_t seed);
  static Encoder linear_table(std::size_t dim, std::uint64_t seed);
  static Encoder precomputed(std::size_t dim,
                             std::unordered_map<std::string, EmbeddingVector> table);
  // JSONL: header {"dim": n}, then {"id": ..., "vector": [...]} per line.
  static Encoder load_precomputed(const std::filesystem::path& path);

  EncoderKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  bool differentiable() const { return kind_ == EncoderKind::kLinearTable; }
  bool query_text_shared() const { return true; }

  EmbeddingVector embed(Role role, std::string_view text) const;
  EmbeddingVector embed_tokens(std::span<const std::string> tokens) const;
  EmbeddingVector embed_record(const TextRecord& record) const;

  // E[token] for the linear_table encoder.
  EmbeddingVector token_vector(std::string_view token) const;

 private:
  Encoder(EncoderKind kind, std::size_t dim, std::uint64_t seed);

  EncoderKind kind_;
  std::size_t dim_;
  std::uint64_t seed_;
  std::shared_ptr<const std::unordered_map<std::string, EmbeddingVector>> table_;
};

// Row-major positions x candidates matrix of exact similarity deltas.
struct SwapDeltas {
  std::size_t positions = 0;
  std::size_t candidates = 0;
  std::vector<double> values;

  double at(std::size_t position, std::size_t candidate) const {
    return values[position * candidates + candidate];
  }
};

/// Entry (p, c) is Sim(q, f_T(tokens with p := c)) - Sim(q, f_T(tokens)).
///
/// Dot product uses the closed form q . (E[c] - E[t_p]) / n. Cosine
/// re-embeds each swapped sequence. Throws CapabilityError for a
/// non-differentiable encoder and DomainError for an empty sequence.
SwapDeltas swap_gradient(const Encoder& encoder, std::span<const double> query_vec,
                         std::span<const std::string> tokens, SimilarityMetric metric,
                         std::span<const std::string> candidates);

}  // namespace prag
