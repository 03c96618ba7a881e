#pragma once

#include <string>
#include <string_view>

namespace prag {

enum class AttackKind {
  kBlackbox,
  kWhitebox,
  kPromptInjection,
  kCorpusPoisoning,
  kVariantS,
  kVariantI,
};

enum class ConcatOrder { kSThenI, kIThenS };

std::string_view to_string(AttackKind kind);
AttackKind attack_kind_from_string(std::string_view s);
std::string_view to_string(ConcatOrder order);
ConcatOrder concat_order_from_string(std::string_view s);

// One crafted text P = S (+) I. `retrieval_text` is S, `effectiveness_text` is I.
struct PoisonText {
  std::string case_id;
  int j = 1;
  std::string retrieval_text;
  std::string effectiveness_text;
  std::string composed;
  ConcatOrder order = ConcatOrder::kSThenI;
  AttackKind attack_kind = AttackKind::kBlackbox;
  int trials_used = 1;

  std::string id() const;

  bool operator==(const PoisonText&) const = default;
};

std::string poison_id(std::string_view case_id, int j);

// Joins S and I with a single space in the requested order; an empty part
// contributes nothing.
std::string compose(std::string_view retrieval_text, std::string_view effectiveness_text,
                    ConcatOrder order);

}  // namespace prag
