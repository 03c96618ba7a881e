#include "matching.hpp"

#include "text.hpp"

namespace prag {

std::string normalize_for_match(std::string_view s) {
  return text::to_lower(text::collapse_whitespace(s));
}

bool substring_match(std::string_view generated, std::string_view target) {
  const auto t = text::strip_punctuation(normalize_for_match(target));
  if (t.empty()) return false;
  return normalize_for_match(generated).find(t) != std::string::npos;
}

}  // namespace prag
