#pragma once

#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "generation.hpp"

namespace prag {

/// Character n-gram language model with add-alpha smoothing.
///
/// Symbols are Unicode code points seen in the clean training texts plus one
/// out-of-vocabulary symbol; histories are left-padded with a start symbol
/// that is never predicted.
class NgramLM {
 public:
  int order() const { return n_; }
  double alpha() const { return alpha_; }
  std::size_t alphabet_size() const { return alphabet_.size() + 1; }

  // Smoothed P(symbol | history); history holds the n-1 preceding code
  // points (shorter at text start).
  double probability(std::u32string_view history, char32_t cp) const;

 private:
  friend NgramLM train_lm(const KnowledgeDatabase& db, int n, double alpha);
  friend double perplexity(const NgramLM& lm, std::string_view text);

  std::u32string symbols(const std::vector<char32_t>& cps) const;
  double probability_of_symbols(std::u32string_view context, char32_t symbol) const;

  int n_ = 3;
  double alpha_ = 0.1;
  std::unordered_map<char32_t, char32_t> alphabet_;  // code point -> symbol id
  std::unordered_map<std::u32string, std::uint64_t> ngram_counts_;
  std::unordered_map<std::u32string, std::uint64_t> context_counts_;
};

// Trains on clean-origin records only. Throws DomainError when there are none
// or when n < 1 or alpha <= 0.
NgramLM train_lm(const KnowledgeDatabase& db, int n = 3, double alpha = 0.1);

// exp(mean negative log-probability per character). Throws DomainError on
// empty text.
double perplexity(const NgramLM& lm, std::string_view text);

struct RocPoint {
  double threshold = std::numeric_limits<double>::infinity();
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // first point is (0, 0) at +inf
  double auc = 0.0;
};

// Poison-positive when score >= threshold. AUC is the Mann-Whitney statistic
// with ties counted one half.
RocCurve roc_auc(std::span<const double> clean_scores, std::span<const double> poison_scores);

std::string paraphrase_prompt(std::string_view question, int count);

// Rule-based: rotate tokens by 1..count positions and apply a fixed synonym
// table. Outputs are pairwise distinct and never equal the input.
std::vector<std::string> mock_paraphrase(std::string_view question, int count);

// Reads {"paraphrased_questions": [...]} from an LLM reply, tolerating text
// around the JSON object. Throws ProtocolError.
std::vector<std::string> parse_paraphrase_reply(std::string_view reply, int count);

std::vector<std::string> paraphrase_question(const GeneratorConfig& paraphraser,
                                             std::string_view question, int count = 5);

}  // namespace prag
