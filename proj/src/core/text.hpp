#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace prag::text {

// One whitespace-delimited word split into leading punctuation, core, and
// trailing punctuation. Concatenating the three yields the original bytes.
struct Word {
  std::string lead;
  std::string core;
  std::string trail;
};

std::vector<Word> split_words(std::string_view text);

// Lowercase, split on Unicode whitespace, strip surrounding punctuation,
// drop empty tokens.
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// ASCII case fold; multi-byte sequences pass through unchanged so byte
// offsets are preserved.
std::string to_lower(std::string_view s);

// Collapses runs of Unicode whitespace to one ASCII space and trims both ends.
std::string collapse_whitespace(std::string_view s);

// Strips leading and trailing punctuation and whitespace code points.
std::string strip_punctuation(std::string_view s);

std::size_t count_words(std::string_view s);

// Decodes UTF-8; malformed bytes become U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view s);

bool is_space(char32_t cp);
bool is_punct(char32_t cp);

// 64-bit FNV-1a over the little-endian seed bytes followed by data.
std::uint64_t fnv1a64(std::uint64_t seed, std::string_view data);

// splitmix64 output function.
std::uint64_t mix64(std::uint64_t x);

// Lowercase hex SHA-256 of raw bytes.
std::string sha256_hex(std::string_view data);

// Deterministic stream built on splitmix64; stable across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  // Uniform in (0, 1); never returns 0.
  double uniform_open() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t below(std::uint64_t bound) { return next() % bound; }

 private:
  std::uint64_t state_;
};

}  // namespace prag::text
