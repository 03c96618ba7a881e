#include "defense.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

#include "errors.hpp"
#include "text.hpp"

namespace prag {

namespace {
constexpr char32_t kStartSymbol = 0;
constexpr char32_t kUnknownSymbol = 1;
}  // namespace

std::u32string NgramLM::symbols(const std::vector<char32_t>& cps) const {
  std::u32string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) {
    auto it = alphabet_.find(cp);
    out.push_back(it == alphabet_.end() ? kUnknownSymbol : it->second);
  }
  return out;
}

double NgramLM::probability_of_symbols(std::u32string_view context, char32_t symbol) const {
  std::u32string gram(context);
  const auto ctx_it = context_counts_.find(gram);
  gram.push_back(symbol);
  const auto gram_it = ngram_counts_.find(gram);
  const double c_gram = gram_it == ngram_counts_.end() ? 0.0 : static_cast<double>(gram_it->second);
  const double c_ctx = ctx_it == context_counts_.end() ? 0.0 : static_cast<double>(ctx_it->second);
  return (c_gram + alpha_) / (c_ctx + alpha_ * static_cast<double>(alphabet_size()));
}

double NgramLM::probability(std::u32string_view history, char32_t cp) const {
  const auto h = static_cast<std::size_t>(n_ - 1);
  std::u32string context(h, kStartSymbol);
  const auto hist = symbols({history.begin(), history.end()});
  const auto take = std::min(h, hist.size());
  std::copy(hist.end() - static_cast<std::ptrdiff_t>(take), hist.end(),
            context.end() - static_cast<std::ptrdiff_t>(take));
  const auto sym = symbols({cp});
  return probability_of_symbols(context, sym[0]);
}

NgramLM train_lm(const KnowledgeDatabase& db, int n, double alpha) {
  if (n < 1) throw DomainError("n-gram order must be >= 1");
  if (!(alpha > 0.0)) throw DomainError("smoothing alpha must be > 0");
  NgramLM lm;
  lm.n_ = n;
  lm.alpha_ = alpha;

  std::vector<std::vector<char32_t>> texts;
  std::set<char32_t> seen;
  for (const auto& r : db.records()) {
    if (r.origin != Origin::kClean) continue;
    texts.push_back(text::decode_utf8(r.text));
    seen.insert(texts.back().begin(), texts.back().end());
  }
  if (texts.empty()) throw DomainError("language model needs at least one clean record");
  char32_t next_symbol = 2;
  for (char32_t cp : seen) lm.alphabet_.emplace(cp, next_symbol++);

  const auto h = static_cast<std::size_t>(n - 1);
  for (const auto& cps : texts) {
    std::u32string padded(h, kStartSymbol);
    padded += lm.symbols(cps);
    for (std::size_t i = h; i < padded.size(); ++i) {
      const auto context = padded.substr(i - h, h);
      ++lm.context_counts_[context];
      ++lm.ngram_counts_[context + padded[i]];
    }
  }
  return lm;
}

double perplexity(const NgramLM& lm, std::string_view text_in) {
  const auto cps = text::decode_utf8(text_in);
  if (cps.empty()) throw DomainError("perplexity of empty text");
  const auto h = static_cast<std::size_t>(lm.n_ - 1);
  std::u32string padded(h, kStartSymbol);
  padded += lm.symbols(cps);
  double nll = 0.0;
  for (std::size_t i = h; i < padded.size(); ++i) {
    nll -= std::log(lm.probability_of_symbols(std::u32string_view(padded).substr(i - h, h), padded[i]));
  }
  return std::exp(nll / static_cast<double>(cps.size()));
}

RocCurve roc_auc(std::span<const double> clean_scores, std::span<const double> poison_scores) {
  if (clean_scores.empty() || poison_scores.empty()) {
    throw DomainError("roc_auc needs non-empty clean and poison score lists");
  }
  for (auto s : {clean_scores, poison_scores}) {
    for (double x : s) {
      if (std::isnan(x)) throw DomainError("roc_auc score is NaN");
    }
  }
  const double nc = static_cast<double>(clean_scores.size());
  const double np = static_cast<double>(poison_scores.size());

  // Threshold sweep, descending over the distinct scores.
  std::map<double, std::pair<std::size_t, std::size_t>, std::greater<>> by_score;
  for (double x : clean_scores) ++by_score[x].first;
  for (double x : poison_scores) ++by_score[x].second;
  RocCurve curve;
  curve.points.push_back({});
  std::size_t fp = 0;
  std::size_t tp = 0;
  for (const auto& [score, counts] : by_score) {
    fp += counts.first;
    tp += counts.second;
    curve.points.push_back({score, static_cast<double>(fp) / nc, static_cast<double>(tp) / np});
  }

  // Rank-sum with midranks for ties, ascending order.
  double rank = 1.0;
  double poison_rank_sum = 0.0;
  for (auto it = by_score.rbegin(); it != by_score.rend(); ++it) {
    const auto group = static_cast<double>(it->second.first + it->second.second);
    const double midrank = rank + (group - 1.0) / 2.0;
    poison_rank_sum += midrank * static_cast<double>(it->second.second);
    rank += group;
  }
  curve.auc = (poison_rank_sum - np * (np + 1.0) / 2.0) / (np * nc);
  return curve;
}

std::string paraphrase_prompt(std::string_view question, int count) {
  std::string list;
  for (int i = 1; i <= count; ++i) {
    if (i > 1) list += ", ";
    list += "question" + std::to_string(i);
  }
  return "This is my question: " + std::string(question) + ". \n\nPlease craft " +
         std::to_string(count) +
         " paraphrased versions for the question. \n\nGive your reply as a JSON formatted "
         "string.\n\nThe reply should use \"paraphrased_questions\" as key,\n\n[" +
         list + "] as value.";
}

namespace {

const std::map<std::string, std::string>& synonyms() {
  static const std::map<std::string, std::string> table = {
      {"who", "which person"},    {"what", "which thing"},     {"when", "at what time"},
      {"where", "in which place"}, {"ceo", "chief executive"},  {"founder", "creator"},
      {"founded", "established"}, {"capital", "main city"},    {"largest", "biggest"},
      {"biggest", "largest"},     {"wrote", "authored"},       {"invented", "devised"},
      {"discovered", "uncovered"}, {"city", "town"},           {"country", "nation"},
      {"company", "firm"},        {"film", "movie"},           {"movie", "film"},
      {"song", "track"},          {"book", "novel"},           {"president", "leader"},
      {"director", "filmmaker"},  {"author", "writer"},        {"many", "numerous"},
      {"first", "earliest"},      {"river", "waterway"},       {"mountain", "peak"},
      {"team", "squad"},          {"language", "tongue"},      {"currency", "money"},
      {"built", "constructed"},   {"leader", "head"},          {"chairman", "chair"},
      {"painted", "created"},     {"composed", "wrote"},       {"won", "claimed"},
  };
  return table;
}

constexpr std::array<std::string_view, 5> kPrefixes = {"tell me", "i wonder", "please answer",
                                                       "kindly say", "do you know"};

}  // namespace

std::vector<std::string> mock_paraphrase(std::string_view question, int count) {
  if (count < 1) throw DomainError("paraphrase count must be >= 1");
  auto tokens = text::tokenize(question);
  for (auto& tok : tokens) {
    if (auto it = synonyms().find(tok); it != synonyms().end()) tok = it->second;
  }
  const auto trimmed = text::collapse_whitespace(question);
  const std::string suffix = !trimmed.empty() && trimmed.back() == '?' ? "?" : "";
  const auto original = normalize_question(question);
  std::set<std::string> used{original};
  std::vector<std::string> out;
  for (int i = 1; i <= count; ++i) {
    auto rotated = tokens;
    if (!rotated.empty()) {
      std::rotate(rotated.begin(), rotated.begin() + static_cast<std::ptrdiff_t>(i % rotated.size()),
                  rotated.end());
    }
    std::string candidate = text::join(rotated, " ");
    // Fall back to prefixes, then a numbered form, until the text is new.
    for (std::size_t attempt = 0; used.count(normalize_question(candidate)) != 0; ++attempt) {
      const auto base = text::join(rotated, " ");
      candidate = attempt < kPrefixes.size()
                      ? std::string(kPrefixes[(attempt + static_cast<std::size_t>(i)) % kPrefixes.size()]) +
                            (base.empty() ? "" : " " + base)
                      : "variant " + std::to_string(i) + "." + std::to_string(attempt) +
                            (base.empty() ? "" : " " + base);
    }
    used.insert(normalize_question(candidate));
    out.push_back(candidate + suffix);
  }
  return out;
}

std::vector<std::string> parse_paraphrase_reply(std::string_view reply, int count) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw ProtocolError("paraphrase reply contains no JSON object");
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(reply.substr(open, close - open + 1));
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("paraphrase reply is not valid JSON: ") + e.what());
  }
  if (!doc.contains("paraphrased_questions") || !doc["paraphrased_questions"].is_array()) {
    throw ProtocolError("paraphrase reply lacks array \"paraphrased_questions\"");
  }
  std::vector<std::string> out;
  for (const auto& q : doc["paraphrased_questions"]) {
    if (!q.is_string()) throw ProtocolError("paraphrased_questions must hold strings");
    if (static_cast<int>(out.size()) < count) out.push_back(q.get<std::string>());
  }
  if (out.empty()) throw ProtocolError("paraphrased_questions is empty");
  return out;
}

std::vector<std::string> paraphrase_question(const GeneratorConfig& paraphraser,
                                             std::string_view question, int count) {
  if (count < 1) throw DomainError("paraphrase count must be >= 1");
  if (paraphraser.kind == GeneratorKind::kMockReader) return mock_paraphrase(question, count);
  return parse_paraphrase_reply(
      chat_complete(paraphraser, paraphrase_prompt(question, count), paraphraser.temperature), count);
}

}  // namespace prag
