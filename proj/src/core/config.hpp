#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "attack.hpp"
#include "embedding.hpp"
#include "generation.hpp"
#include "json.hpp"

namespace prag {

struct EncoderSpec {
  EncoderKind kind = EncoderKind::kFeatureHash;
  std::size_t dim = 1024;
  std::uint64_t seed = 0;
  std::string precomputed_path;
};

Encoder make_encoder(const EncoderSpec& spec);

struct ParaphraseDefense {
  bool enabled = false;
  int count = 5;
  // Falls back to the RAG generator's endpoint settings when unset.
  std::optional<GeneratorConfig> generator;
};

struct PplFilterDefense {
  bool enabled = false;
  double threshold = 50.0;  // flag retrieved texts with perplexity >= threshold
  int n = 3;
  double alpha = 0.1;
};

// Applied in a fixed order: paraphrase (query side), dedup (database side),
// perplexity filter (retrieval side), knowledge expansion (k override).
struct DefenseStack {
  ParaphraseDefense paraphrase;
  bool dedup = false;
  PplFilterDefense ppl_filter;
  std::size_t knowledge_expansion_k = 0;  // 0 = off
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string corpus;    // JSONL path or snapshot directory, CLI only
  std::string cases;     // JSONL path, CLI only
  std::size_t k = 5;
  SimilarityMetric metric = SimilarityMetric::kCosine;
  EncoderSpec encoder;
  std::optional<AttackKind> attack_kind = AttackKind::kBlackbox;  // nullopt = no attack
  AttackConfig attack;
  GeneratorConfig generator;
  DefenseStack defenses;
  int repeats = 1;
  int cases_per_repeat = 0;  // 0 = all cases (split evenly when repeats > 1)
  int threads = 0;           // 0 = hardware concurrency

  void validate() const;
};

nlohmann::json to_json(const GeneratorConfig& g, bool redact_secrets = false);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

// Full config including defaults; `redact_secrets` blanks auth headers.
nlohmann::json to_json(const ExperimentConfig& cfg, bool redact_secrets = false);

// Reads a config document. Unknown keys are rejected. When `require_seed` is
// set the document must carry a top-level "seed".
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, bool require_seed = false);

// Sets `dotted` (e.g. "attack.N") in `doc` from a command-line string. The
// key must already exist; the value is coerced to the existing type.
void apply_override(nlohmann::json& doc, std::string_view dotted, std::string_view value);

// Defaults merged with `user`, ready for overrides.
nlohmann::json config_document(const nlohmann::json& user);

}  // namespace prag
