#include "poison.hpp"

#include "errors.hpp"

namespace prag {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kBlackbox: return "blackbox";
    case AttackKind::kWhitebox: return "whitebox";
    case AttackKind::kPromptInjection: return "prompt_injection";
    case AttackKind::kCorpusPoisoning: return "corpus_poisoning";
    case AttackKind::kVariantS: return "variant_S";
    case AttackKind::kVariantI: return "variant_I";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(std::string_view s) {
  for (auto k : {AttackKind::kBlackbox, AttackKind::kWhitebox, AttackKind::kPromptInjection,
                 AttackKind::kCorpusPoisoning, AttackKind::kVariantS, AttackKind::kVariantI}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown attack kind '" + std::string(s) + "'");
}

std::string_view to_string(ConcatOrder order) {
  return order == ConcatOrder::kSThenI ? "S_then_I" : "I_then_S";
}

ConcatOrder concat_order_from_string(std::string_view s) {
  if (s == "S_then_I") return ConcatOrder::kSThenI;
  if (s == "I_then_S") return ConcatOrder::kIThenS;
  throw ConfigError("unknown concatenation order '" + std::string(s) + "'");
}

std::string poison_id(std::string_view case_id, int j) {
  return "poison::" + std::string(case_id) + "::" + std::to_string(j);
}

std::string PoisonText::id() const { return poison_id(case_id, j); }

std::string compose(std::string_view retrieval_text, std::string_view effectiveness_text,
                    ConcatOrder order) {
  const auto first = order == ConcatOrder::kSThenI ? retrieval_text : effectiveness_text;
  const auto second = order == ConcatOrder::kSThenI ? effectiveness_text : retrieval_text;
  if (first.empty()) return std::string(second);
  if (second.empty()) return std::string(first);
  std::string out(first);
  out += ' ';
  out += second;
  return out;
}

}  // namespace prag
