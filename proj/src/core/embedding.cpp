#include "embedding.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "errors.hpp"
#include "text.hpp"

namespace prag {

using nlohmann::json;

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kFeatureHash: return "feature_hash";
    case EncoderKind::kLinearTable: return "linear_table";
    case EncoderKind::kPrecomputed: return "precomputed";
  }
  return "unknown";
}

EncoderKind encoder_kind_from_string(std::string_view s) {
  if (s == "feature_hash") return EncoderKind::kFeatureHash;
  if (s == "linear_table") return EncoderKind::kLinearTable;
  if (s == "precomputed") return EncoderKind::kPrecomputed;
  throw ConfigError("unknown encoder kind '" + std::string(s) + "'");
}

Encoder::Encoder(EncoderKind kind, std::size_t dim, std::uint64_t seed)
    : kind_(kind), dim_(dim), seed_(seed) {
  if (dim < 2) throw ConfigError("encoder dim must be >= 2");
}

Encoder Encoder::feature_hash(std::size_t dim, std::uint64_t seed) {
  return Encoder(EncoderKind::kFeatureHash, dim, seed);
}

Encoder Encoder::linear_table(std::size_t dim, std::uint64_t seed) {
  return Encoder(EncoderKind::kLinearTable, dim, seed);
}

Encoder Encoder::precomputed(std::size_t dim,
                             std::unordered_map<std::string, EmbeddingVector> table) {
  Encoder e(EncoderKind::kPrecomputed, dim, 0);
  for (const auto& [id, v] : table) {
    if (v.size() != dim) {
      throw DomainError("precomputed vector for '" + id + "' has dimension " +
                        std::to_string(v.size()) + ", expected " + std::to_string(dim));
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw DomainError("precomputed vector for '" + id + "' is not finite");
    }
  }
  e.table_ = std::make_shared<const std::unordered_map<std::string, EmbeddingVector>>(std::move(table));
  return e;
}

Encoder Encoder::load_precomputed(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  std::unordered_map<std::string, EmbeddingVector> table;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    if (dim == 0) {
      if (!obj.is_object() || !obj.contains("dim") || !obj["dim"].is_number_unsigned()) {
        throw ParseError(line_no, "expected header {\"dim\": n}");
      }
      dim = obj["dim"].get<std::size_t>();
      if (dim < 2) throw ParseError(line_no, "dim must be >= 2");
      continue;
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("vector") || !obj["vector"].is_array()) {
      throw ParseError(line_no, "expected {\"id\": string, \"vector\": [numbers]}");
    }
    auto id = obj["id"].get<std::string>();
    EmbeddingVector v;
    for (const auto& x : obj["vector"]) {
      if (!x.is_number()) throw ParseError(line_no, "vector entries must be numbers");
      v.push_back(x.get<double>());
    }
    if (v.size() != dim) throw ParseError(line_no, "vector length differs from header dim");
    if (!table.emplace(id, std::move(v)).second) throw ConflictError(id);
  }
  if (dim == 0) throw ParseError(line_no, "missing {\"dim\": n} header");
  return precomputed(dim, std::move(table));
}

EmbeddingVector Encoder::token_vector(std::string_view token) const {
  if (kind_ != EncoderKind::kLinearTable) {
    throw CapabilityError("token vectors exist only for the linear_table encoder");
  }
  text::SplitMix64 rng(text::fnv1a64(seed_, token));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  EmbeddingVector v(dim_);
  for (std::size_t i = 0; i < dim_; i += 2) {
    // Box-Muller: two unit normals per pair of uniforms.
    const double u1 = rng.uniform_open();
    const double u2 = rng.uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    v[i] = r * std::cos(theta) * scale;
    if (i + 1 < dim_) v[i + 1] = r * std::sin(theta) * scale;
  }
  return v;
}

EmbeddingVector Encoder::embed_tokens(std::span<const std::string> tokens) const {
  EmbeddingVector v(dim_, 0.0);
  switch (kind_) {
    case EncoderKind::kFeatureHash:
      for (const auto& tok : tokens) {
        const auto bucket = text::mix64(text::fnv1a64(seed_, tok)) % dim_;
        const auto sign_bits = text::mix64(text::fnv1a64(seed_ + 1, tok));
        v[bucket] += (sign_bits >> 63) ? -1.0 : 1.0;
      }
      break;
    case EncoderKind::kLinearTable: {
      if (tokens.empty()) break;
      for (const auto& tok : tokens) {
        const auto e = token_vector(tok);
        for (std::size_t i = 0; i < dim_; ++i) v[i] += e[i];
      }
      const double inv = 1.0 / static_cast<double>(tokens.size());
      for (auto& x : v) x *= inv;
      break;
    }
    case EncoderKind::kPrecomputed:
      throw CapabilityError("precomputed encoder cannot embed raw tokens");
  }
  return v;
}

EmbeddingVector Encoder::embed(Role /*role*/, std::string_view text) const {
  if (kind_ == EncoderKind::kPrecomputed) {
    auto it = table_->find(std::string(text));
    if (it == table_->end()) throw LookupError(std::string(text));
    return it->second;
  }
  const auto tokens = text::tokenize(text);
  return embed_tokens(tokens);
}

EmbeddingVector Encoder::embed_record(const TextRecord& record) const {
  if (kind_ == EncoderKind::kPrecomputed) return embed(Role::kText, record.id);
  return embed(Role::kText, record.text);
}

SwapDeltas swap_gradient(const Encoder& encoder, std::span<const double> query_vec,
                         std::span<const std::string> tokens, SimilarityMetric metric,
                         std::span<const std::string> candidates) {
  if (!encoder.differentiable()) {
    throw CapabilityError("swap_gradient requires a differentiable encoder, got " +
                          std::string(to_string(encoder.kind())));
  }
  if (tokens.empty()) throw DomainError("swap_gradient on an empty token sequence");
  if (query_vec.size() != encoder.dim()) throw DomainError("query vector dimension mismatch");

  SwapDeltas out;
  out.positions = tokens.size();
  out.candidates = candidates.size();
  out.values.resize(out.positions * out.candidates);

  std::unordered_map<std::string, EmbeddingVector> cache;
  const auto vec = [&](const std::string& tok) -> const EmbeddingVector& {
    auto it = cache.find(tok);
    if (it == cache.end()) it = cache.emplace(tok, encoder.token_vector(tok)).first;
    return it->second;
  };

  const double n = static_cast<double>(tokens.size());
  if (metric == SimilarityMetric::kDotProduct) {
    std::vector<double> cand_score(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) cand_score[c] = dot(query_vec, vec(candidates[c]));
    for (std::size_t p = 0; p < tokens.size(); ++p) {
      const double cur = dot(query_vec, vec(tokens[p]));
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        out.values[p * out.candidates + c] =
            candidates[c] == tokens[p] ? 0.0 : (cand_score[c] - cur) / n;
      }
    }
    return out;
  }

  const auto base = encoder.embed_tokens(tokens);
  const double base_sim = similarity(metric, query_vec, base);
  std::vector<std::string> swapped(tokens.begin(), tokens.end());
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (candidates[c] == tokens[p]) {
        out.values[p * out.candidates + c] = 0.0;
        continue;
      }
      swapped[p] = candidates[c];
      EmbeddingVector v(encoder.dim(), 0.0);
      for (const auto& tok : swapped) {
        const auto& e = vec(tok);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += e[i];
      }
      for (auto& x : v) x /= n;
      out.values[p * out.candidates + c] = similarity(metric, query_vec, v) - base_sim;
    }
    swapped[p] = tokens[p];
  }
  return out;
}

}  // namespace prag
