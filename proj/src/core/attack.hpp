#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "embedding.hpp"
#include "generation.hpp"
#include "poison.hpp"
#include "similarity.hpp"

namespace prag {

struct TargetCase {
  std::string case_id;
  std::string question;
  std::string correct_answer;
  std::string target_answer;

  // Throws DomainError if a field is empty or the target equals the correct
  // answer case-insensitively.
  void validate() const;

  bool operator==(const TargetCase&) const = default;
};

// JSONL with "case_id" (or "id"), "question", "correct_answer", "target_answer".
std::vector<TargetCase> load_cases(const std::filesystem::path& path);
void save_cases(const std::filesystem::path& path, std::span<const TargetCase> cases);

enum class FlipPositions { kSOnly, kSAndI };

std::string_view to_string(FlipPositions positions);
FlipPositions flip_positions_from_string(std::string_view s);

struct WhiteboxConfig {
  int max_flip_iters = 0;  // 0 means 3 x |tokens of S|
  int candidate_pool_size = 64;
  FlipPositions positions = FlipPositions::kSOnly;
  // When non-empty, the candidate pool is exactly this list for every
  // iteration instead of sampled pseudo-words plus the tokens of Q and I.
  std::vector<std::string> vocabulary;
};

struct AttackConfig {
  int N = 5;
  int L = 50;
  int V = 30;
  ConcatOrder order = ConcatOrder::kSThenI;
  std::uint64_t seed = 0;
  WhiteboxConfig whitebox;

  void validate() const;
};

struct EffectivenessText {
  std::string text;
  int trials_used = 0;
};

// Up to L trials; returns the first verified candidate, else the last one.
EffectivenessText run_trials(int L, const std::function<std::string(int trial)>& produce,
                             const std::function<bool(const std::string&)>& verify);

// Attacker-side prompt asking an LLM for a V-word corpus supporting R.
std::string attacker_prompt(const TargetCase& target, int V);

// Deterministic stand-in for the attacker LLM: an assertion sentence the
// mock reader understands, padded with seeded filler to about V words.
std::string mock_attacker_text(const TargetCase& target, int j, int trial, int V,
                               std::uint64_t seed);

EffectivenessText craft_effectiveness_text(const TargetCase& target, const GeneratorConfig& generator,
                                           int L, int V, int j = 1, std::uint64_t seed = 0);

std::vector<PoisonText> craft_blackbox(const TargetCase& target, const AttackConfig& cfg,
                                       const GeneratorConfig& generator);

struct FlipResult {
  std::string retrieval_text;      // detokenized S
  std::string effectiveness_text;  // I, possibly edited under kSAndI
  std::vector<double> objective_trace;  // [initial, after each accepted swap]
};

/// Greedy token-flip ascent on Sim(f_Q(Q), f_T(S + I)), starting at S = Q.
///
/// Each iteration evaluates every (position, candidate) swap exactly and
/// applies the best one only if it strictly improves the objective.
FlipResult optimize_retrieval_text(const TargetCase& target, std::string_view effectiveness_text,
                                   const Encoder& encoder, SimilarityMetric metric,
                                   const WhiteboxConfig& wb, int j = 1, std::uint64_t seed = 0);

std::vector<PoisonText> craft_whitebox(const TargetCase& target, const AttackConfig& cfg,
                                       const GeneratorConfig& generator, const Encoder& encoder,
                                       SimilarityMetric metric);

std::string injection_instruction(const TargetCase& target);
std::vector<PoisonText> craft_prompt_injection(const TargetCase& target, int N);

std::vector<PoisonText> craft_corpus_poisoning(const TargetCase& target, int N, const Encoder& encoder,
                                               SimilarityMetric metric, const WhiteboxConfig& wb,
                                               std::uint64_t seed = 0);

// Re-slices full poisons into S-only (kVariantS) or I-only (kVariantI) texts.
std::vector<PoisonText> make_variant(std::span<const PoisonText> full, AttackKind variant);

// Dispatch on kind. Variants are sliced from black-box poisons.
std::vector<PoisonText> craft(AttackKind kind, const TargetCase& target, const AttackConfig& cfg,
                              const GeneratorConfig& generator, const Encoder& encoder,
                              SimilarityMetric metric);

nlohmann::json poison_to_json(const PoisonText& poison);
PoisonText poison_from_json(const nlohmann::json& obj);
void save_poisons(const std::filesystem::path& path, std::span<const PoisonText> poisons);
std::vector<PoisonText> load_poisons(const std::filesystem::path& path);

}  // namespace prag
