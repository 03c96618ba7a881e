#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "attack.hpp"
#include "config.hpp"
#include "corpus.hpp"

namespace fixture {

// Synthetic closed-loop corpus.
//
// Main layout: 1,000 clean records and 10 target cases. Cases 0..7 each have
// kAnswerDocs records stating "the answer to <Q> is <correct answer>." with
// a short tail; cases 8 and 9 have none. Everything else is filler text over
// an unrelated pseudo-word vocabulary.
//
// Decoy layout adds, per case, kDecoys records repeating Q twice followed by
// decoy_tail(Q) unrelated words, and kParaphraseDocs records written in the
// synonym phrasing of Q. With V = 30 an I-only poison holds Q twice plus
// about 29 - 2n other words (n = words in Q) and a full poison holds Q three
// times plus the same tail, so a decoy tail of (42 - 3n) / 2 words sits
// between the two cosine scores under the hash encoder.
inline constexpr int kCases = 10;
inline constexpr int kAnswerable = 8;
inline constexpr int kAnswerDocs = 8;
inline constexpr int kCleanDocs = 1000;
inline constexpr int kDecoys = 6;
inline constexpr int kParaphraseDocs = 2;

struct Fixture {
  std::vector<prag::TextRecord> records;
  std::vector<prag::TargetCase> cases;
  std::vector<std::string> paraphrased_questions;  // hand-written synonym phrasing per case
  prag::KnowledgeDatabase db() const;
};

int decoy_tail(const std::string& question);

Fixture main_fixture(std::uint64_t seed = 20240601);
Fixture decoy_fixture(std::uint64_t seed = 20240601);

// Hash-encoder, cosine, mock-reader experiment defaults used by the suites.
prag::ExperimentConfig base_config(std::uint64_t seed = 7);

void write_corpus(const Fixture& f, const std::filesystem::path& path);
void write_cases(const Fixture& f, const std::filesystem::path& path);

// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
