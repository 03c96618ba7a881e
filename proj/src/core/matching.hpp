#pragma once

#include <string>
#include <string_view>

namespace prag {

// Case-folds and collapses whitespace on both sides and strips surrounding
// punctuation from the target; true iff the target is then a substring of
// the generated answer. An empty normalized target never matches.
bool substring_match(std::string_view generated, std::string_view target);

std::string normalize_for_match(std::string_view s);

}  // namespace prag
