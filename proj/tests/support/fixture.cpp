#include "fixture.hpp"

#include <array>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace fixture {

namespace {

constexpr std::array<const char*, 24> kOnsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t",
                                                 "v", "z", "br", "dr", "gl", "kr", "pl", "st", "tr", "sk", "sn", "gr"};
constexpr std::array<const char*, 8> kVowels = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
constexpr std::array<const char*, 10> kCodas = {"", "n", "r", "l", "x", "m", "sh", "nd", "rk", "st"};
constexpr std::array<const char*, 6> kGlue = {"the", "a", "in", "and", "was", "on"};

struct Template {
  const char* question;    // {E} is the entity
  const char* paraphrase;  // same question in synonym phrasing
};

constexpr std::array<Template, kCases> kTemplates = {{
    {"who is the ceo of {E}?", "which person is the chief executive of {E}?"},
    {"what is the capital of {E}?", "which thing is the main city of {E}?"},
    {"who wrote the book {E}?", "which person authored the novel {E}?"},
    {"when was the company {E} founded?", "at what time was the firm {E} established?"},
    {"where is the river {E}?", "in which place is the waterway {E}?"},
    {"who directed the film {E}?", "which person directed the movie {E}?"},
    {"what currency does {E} use?", "which thing money does {E} use?"},
    {"which team won the {E} cup?", "which squad claimed the {E} cup?"},
    {"how many people live in the city {E}?", "how numerous people live in the town {E}?"},
    {"who invented the {E} engine?", "which person devised the {E} engine?"},
}};

class Words {
 public:
  explicit Words(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t below(std::uint64_t n) { return rng_() % n; }

  std::string fresh() {
    for (;;) {
      std::string w;
      const auto syllables = 2 + below(2);
      for (std::uint64_t s = 0; s < syllables; ++s) {
        w += kOnsets[below(kOnsets.size())];
        w += kVowels[below(kVowels.size())];
        if (s + 1 == syllables) w += kCodas[below(kCodas.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }

 private:
  std::mt19937_64 rng_;
  std::set<std::string> used_;
};

std::string substitute(const char* pattern, const std::string& entity) {
  std::string out = pattern;
  out.replace(out.find("{E}"), 3, entity);
  return out;
}

std::string without_question_mark(std::string s) {
  if (!s.empty() && s.back() == '?') s.pop_back();
  return s;
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string sentence(Words& words, const std::vector<std::string>& vocab, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += words.below(4) == 0 ? kGlue[words.below(kGlue.size())] : vocab[words.below(vocab.size())];
  }
  return out;
}

// n distinct vocabulary words, no glue.
std::string plain_sentence(Words& words, const std::vector<std::string>& vocab, std::size_t n) {
  std::set<std::size_t> picked;
  std::string out;
  while (picked.size() < n) {
    const auto i = words.below(vocab.size());
    if (!picked.insert(i).second) continue;
    if (!out.empty()) out += ' ';
    out += vocab[i];
  }
  return out;
}

prag::TextRecord clean(std::string id, std::string text) {
  prag::TextRecord r;
  r.id = std::move(id);
  r.text = std::move(text);
  return r;
}

std::size_t word_count(const std::string& s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char ch : s) {
    const bool space = ch == ' ';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

char digit(int i) { return static_cast<char>('0' + i); }

Fixture build(std::uint64_t seed, bool decoys) {
  Words words(seed);
  std::vector<std::string> vocab;
  for (int i = 0; i < 400; ++i) vocab.push_back(words.fresh());

  Fixture f;
  for (int c = 0; c < kCases; ++c) {
    const std::string entity = words.fresh() + " " + words.fresh();
    prag::TargetCase tc;
    tc.case_id = std::string("case") + digit(c);
    tc.question = substitute(kTemplates[c].question, entity);
    tc.correct_answer = capitalize(words.fresh()) + " " + capitalize(words.fresh());
    tc.target_answer = capitalize(words.fresh()) + " " + capitalize(words.fresh());
    f.cases.push_back(tc);
    f.paraphrased_questions.push_back(substitute(kTemplates[c].paraphrase, entity));
  }

  int doc = 0;
  const auto next_id = [&] { return "doc" + std::to_string(doc++); };
  for (int c = 0; c < kAnswerable; ++c) {
    const auto& tc = f.cases[c];
    for (int a = 0; a < kAnswerDocs; ++a) {
      f.records.push_back(clean(next_id(), "The answer to " + without_question_mark(tc.question) + " is " +
                                               tc.correct_answer + ". " +
                                               capitalize(sentence(words, vocab, 3)) + "."));
    }
  }
  while (doc < kCleanDocs) {
    f.records.push_back(clean(next_id(), capitalize(sentence(words, vocab, 8 + words.below(13))) + "."));
  }
  if (decoys) {
    for (int c = 0; c < kCases; ++c) {
      const auto& tc = f.cases[c];
      const auto q = without_question_mark(tc.question);
      const auto tail = static_cast<std::size_t>(decoy_tail(tc.question));
      for (int d = 0; d < kDecoys; ++d) {
        f.records.push_back(clean("decoy" + std::to_string(c) + "_" + std::to_string(d),
                                  capitalize(q) + "? " + capitalize(q) + ". " +
                                      capitalize(plain_sentence(words, vocab, tail)) + "."));
      }
      const auto p = without_question_mark(f.paraphrased_questions[c]);
      for (int d = 0; d < kParaphraseDocs; ++d) {
        f.records.push_back(clean("para" + std::to_string(c) + "_" + std::to_string(d),
                                  capitalize(p) + "? " + capitalize(p) + ". " +
                                      capitalize(sentence(words, vocab, 4)) + "."));
      }
    }
  }
  return f;
}

}  // namespace

int decoy_tail(const std::string& question) {
  return (42 - 3 * static_cast<int>(word_count(question))) / 2;
}

prag::KnowledgeDatabase Fixture::db() const { return prag::KnowledgeDatabase::from_records(records); }

Fixture main_fixture(std::uint64_t seed) { return build(seed, false); }
Fixture decoy_fixture(std::uint64_t seed) { return build(seed, true); }

prag::ExperimentConfig base_config(std::uint64_t seed) {
  prag::ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.attack.seed = seed;
  cfg.k = 5;
  cfg.metric = prag::SimilarityMetric::kCosine;
  cfg.encoder.kind = prag::EncoderKind::kFeatureHash;
  cfg.encoder.dim = 4096;
  cfg.encoder.seed = 11;
  cfg.attack_kind = prag::AttackKind::kBlackbox;
  cfg.attack.N = 5;
  cfg.generator.kind = prag::GeneratorKind::kMockReader;
  return cfg;
}

void write_corpus(const Fixture& f, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& r : f.records) out << nlohmann::json{{"_id", r.id}, {"text", r.text}}.dump() << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_cases(const Fixture& f, const std::filesystem::path& path) { prag::save_cases(path, f.cases); }

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("prag_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace fixture
