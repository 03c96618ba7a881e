#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attack.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "matching.hpp"
#include "retrieval.hpp"

namespace prag {

struct RetrievalMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const RetrievalMetrics&) const = default;
};

// Poison ids are "poison::<case>::<j>"; returns the case part, if any.
std::optional<std::string> poison_case_of(std::string_view id);

// Precision over k, recall over N, harmonic mean (0 when both are 0).
// Throws DomainError when N < 1.
RetrievalMetrics retrieval_metrics(const RetrievalResult& retrieved, std::string_view case_id, int N);

struct CaseTranscript {
  int repeat = 0;
  std::string case_id;
  std::string query;  // the question actually sent to retrieval (paraphrased or not)
  RetrievalResult retrieved;
  std::vector<std::string> filtered_out;  // removed by the perplexity filter
  std::size_t retrieved_poison_count = 0;
  std::string generated_answer;
  bool matched_target = false;
  bool matched_correct = false;
  RetrievalMetrics metrics;

  bool operator==(const CaseTranscript&) const = default;
};

struct DefenseMetrics {
  std::size_t poisons_injected = 0;
  std::size_t dedup_removed = 0;
  std::size_t dedup_removed_poisons = 0;
  std::size_t ppl_filtered = 0;
  std::optional<double> ppl_auc;  // perplexity ROC AUC over clean vs poison records

  bool operator==(const DefenseMetrics&) const = default;
};

struct EvalReport {
  double asr = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double matched_correct_rate = 0.0;
  std::vector<double> asr_per_repeat;
  std::vector<CaseTranscript> per_case;
  DefenseMetrics defense;
  nlohmann::json config = nlohmann::json::object();
  double runtime_seconds = 0.0;  // not serialized; see emit_report

  // Compares everything except runtime.
  bool operator==(const EvalReport& other) const;
};

/// Runs one experiment end to end.
///
/// Per repeat: select cases, craft poisons, inject, apply database-side
/// defenses, then retrieve, generate, and score each case (and each
/// paraphrase, when that defense is on). Failures are rethrown as
/// ExperimentError naming the stage and case.
EvalReport run_experiment(const KnowledgeDatabase& db, std::span<const TargetCase> cases,
                          const ExperimentConfig& cfg);

struct SweepRow {
  std::size_t k = 0;
  int N = 0;
  double asr = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const SweepRow&) const = default;
};

// One row per (k, N) pair, k-major in the given order.
std::vector<SweepRow> run_sweep(const KnowledgeDatabase& db, std::span<const TargetCase> cases,
                                const ExperimentConfig& base, std::span<const std::size_t> ks,
                                std::span<const int> Ns);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);

// Column order of aggregate.csv.
inline constexpr const char* kAggregateCsvHeader =
    "attack_kind,k,N,cases,asr,precision,recall,f1,matched_correct_rate";
inline constexpr const char* kPerCaseCsvHeader =
    "repeat,case_id,query,retrieved_poison_count,generated_answer,matched_target,"
    "matched_correct,precision,recall,f1";
inline constexpr const char* kSweepCsvHeader = "k,N,asr,precision,recall,f1";

// Writes report.json, aggregate.csv, per_case.csv and timing.json into `dir`.
// report.json is byte-deterministic; timing.json holds wall-clock runtime.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);
EvalReport load_report(const std::filesystem::path& report_json);

// Writes sweep.json, sweep.csv and sweep.dat (gnuplot blocks per N).
void emit_sweep(std::span<const SweepRow> rows, const std::filesystem::path& dir);

std::string csv_escape(std::string_view field);

}  // namespace prag
