#include "config.hpp"

#include <charconv>
#include <set>

#include "errors.hpp"

namespace prag {

using nlohmann::json;

Encoder make_encoder(const EncoderSpec& spec) {
  switch (spec.kind) {
    case EncoderKind::kFeatureHash: return Encoder::feature_hash(spec.dim, spec.seed);
    case EncoderKind::kLinearTable: return Encoder::linear_table(spec.dim, spec.seed);
    case EncoderKind::kPrecomputed:
      if (spec.precomputed_path.empty()) throw ConfigError("encoder.precomputed_path is required");
      return Encoder::load_precomputed(spec.precomputed_path);
  }
  throw ConfigError("unhandled encoder kind");
}

void ExperimentConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (cases_per_repeat < 0) throw ConfigError("cases_per_repeat must be >= 0");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (defenses.paraphrase.count < 1) throw ConfigError("defenses.paraphrase.count must be >= 1");
  if (defenses.ppl_filter.n < 1 || !(defenses.ppl_filter.alpha > 0.0)) {
    throw ConfigError("defenses.ppl_filter needs n >= 1 and alpha > 0");
  }
  attack.validate();
  generator.validate();
  if (defenses.paraphrase.generator) defenses.paraphrase.generator->validate();
}

json to_json(const GeneratorConfig& g, bool redact_secrets) {
  return {{"kind", std::string(to_string(g.kind))},
          {"model", g.model},
          {"temperature", g.temperature},
          {"attacker_temperature", g.attacker_temperature},
          {"endpoint", g.endpoint},
          {"auth_header", redact_secrets && !g.auth_header.empty() ? "<redacted>" : g.auth_header},
          {"system_prompt", g.system_prompt},
          {"system_message", g.system_message},
          {"timeout_ms", g.timeout_ms},
          {"max_retries", g.max_retries},
          {"initial_backoff_ms", g.initial_backoff_ms},
          {"backoff_factor", g.backoff_factor},
          {"max_concurrency", g.max_concurrency}};
}

json to_json(const ExperimentConfig& c, bool redact_secrets) {
  json wb = {{"max_flip_iters", c.attack.whitebox.max_flip_iters},
             {"candidate_pool_size", c.attack.whitebox.candidate_pool_size},
             {"positions", std::string(to_string(c.attack.whitebox.positions))},
             {"vocabulary", c.attack.whitebox.vocabulary}};
  json paraphrase = {{"enabled", c.defenses.paraphrase.enabled},
                     {"count", c.defenses.paraphrase.count}};
  paraphrase["generator"] = c.defenses.paraphrase.generator
                                ? to_json(*c.defenses.paraphrase.generator, redact_secrets)
                                : json(nullptr);
  return {
      {"seed", c.seed},
      {"corpus", c.corpus},
      {"cases", c.cases},
      {"k", c.k},
      {"metric", std::string(to_string(c.metric))},
      {"encoder",
       {{"kind", std::string(to_string(c.encoder.kind))},
        {"dim", c.encoder.dim},
        {"seed", c.encoder.seed},
        {"precomputed_path", c.encoder.precomputed_path}}},
      {"attack",
       {{"kind", c.attack_kind ? std::string(to_string(*c.attack_kind)) : std::string("none")},
        {"N", c.attack.N},
        {"L", c.attack.L},
        {"V", c.attack.V},
        {"order", std::string(to_string(c.attack.order))},
        {"whitebox", wb}}},
      {"generator", to_json(c.generator, redact_secrets)},
      {"defenses",
       {{"paraphrase", paraphrase},
        {"dedup", c.defenses.dedup},
        {"ppl_filter",
         {{"enabled", c.defenses.ppl_filter.enabled},
          {"threshold", c.defenses.ppl_filter.threshold},
          {"n", c.defenses.ppl_filter.n},
          {"alpha", c.defenses.ppl_filter.alpha}}},
        {"knowledge_expansion_k", c.defenses.knowledge_expansion_k}}},
      {"repeats", c.repeats},
      {"cases_per_repeat", c.cases_per_repeat},
      {"threads", c.threads},
  };
}

namespace {

// Rejects keys in `actual` that are absent from `schema`, recursively.
void check_keys(const json& actual, const json& schema, const std::string& prefix) {
  if (!actual.is_object()) return;
  for (const auto& [key, value] : actual.items()) {
    const auto path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    // Null schema slots (optional sub-configs) accept any object.
    if (schema[key].is_object()) check_keys(value, schema[key], path);
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + key + "': " + e.what());
  }
}

}  // namespace

GeneratorConfig generator_config_from_json(const json& j) {
  const GeneratorConfig defaults;
  const json doc = [&] {
    json d = to_json(defaults);
    check_keys(j, d, "generator");
    d.merge_patch(j);
    return d;
  }();
  GeneratorConfig g;
  const std::string w = "generator.";
  g.kind = generator_kind_from_string(get<std::string>(doc, "kind", w));
  g.model = get<std::string>(doc, "model", w);
  g.temperature = get<double>(doc, "temperature", w);
  g.attacker_temperature = get<double>(doc, "attacker_temperature", w);
  g.endpoint = get<std::string>(doc, "endpoint", w);
  g.auth_header = get<std::string>(doc, "auth_header", w);
  g.system_prompt = get<std::string>(doc, "system_prompt", w);
  g.system_message = get<std::string>(doc, "system_message", w);
  g.timeout_ms = get<int>(doc, "timeout_ms", w);
  g.max_retries = get<int>(doc, "max_retries", w);
  g.initial_backoff_ms = get<int>(doc, "initial_backoff_ms", w);
  g.backoff_factor = get<double>(doc, "backoff_factor", w);
  g.max_concurrency = get<int>(doc, "max_concurrency", w);
  return g;
}

json config_document(const json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  json doc = to_json(ExperimentConfig{});
  check_keys(user, doc, "");
  doc.merge_patch(user);
  return doc;
}

ExperimentConfig experiment_config_from_json(const json& user, bool require_seed) {
  if (require_seed && (!user.is_object() || !user.contains("seed"))) {
    throw ConfigError("config must set \"seed\"");
  }
  const json doc = config_document(user);
  ExperimentConfig c;
  c.seed = get<std::uint64_t>(doc, "seed", "");
  c.corpus = get<std::string>(doc, "corpus", "");
  c.cases = get<std::string>(doc, "cases", "");
  c.k = get<std::size_t>(doc, "k", "");
  c.metric = similarity_metric_from_string(get<std::string>(doc, "metric", ""));

  const auto& enc = doc["encoder"];
  c.encoder.kind = encoder_kind_from_string(get<std::string>(enc, "kind", "encoder."));
  c.encoder.dim = get<std::size_t>(enc, "dim", "encoder.");
  c.encoder.seed = get<std::uint64_t>(enc, "seed", "encoder.");
  c.encoder.precomputed_path = get<std::string>(enc, "precomputed_path", "encoder.");

  const auto& atk = doc["attack"];
  const auto kind = get<std::string>(atk, "kind", "attack.");
  c.attack_kind = kind == "none" ? std::nullopt : std::optional(attack_kind_from_string(kind));
  c.attack.N = get<int>(atk, "N", "attack.");
  c.attack.L = get<int>(atk, "L", "attack.");
  c.attack.V = get<int>(atk, "V", "attack.");
  c.attack.order = concat_order_from_string(get<std::string>(atk, "order", "attack."));
  c.attack.seed = c.seed;
  const auto& wb = atk["whitebox"];
  c.attack.whitebox.max_flip_iters = get<int>(wb, "max_flip_iters", "attack.whitebox.");
  c.attack.whitebox.candidate_pool_size = get<int>(wb, "candidate_pool_size", "attack.whitebox.");
  c.attack.whitebox.positions =
      flip_positions_from_string(get<std::string>(wb, "positions", "attack.whitebox."));
  c.attack.whitebox.vocabulary = get<std::vector<std::string>>(wb, "vocabulary", "attack.whitebox.");

  c.generator = generator_config_from_json(doc["generator"]);

  const auto& def = doc["defenses"];
  const auto& para = def["paraphrase"];
  c.defenses.paraphrase.enabled = get<bool>(para, "enabled", "defenses.paraphrase.");
  c.defenses.paraphrase.count = get<int>(para, "count", "defenses.paraphrase.");
  if (para.contains("generator") && !para["generator"].is_null()) {
    c.defenses.paraphrase.generator = generator_config_from_json(para["generator"]);
  }
  c.defenses.dedup = get<bool>(def, "dedup", "defenses.");
  const auto& ppl = def["ppl_filter"];
  c.defenses.ppl_filter.enabled = get<bool>(ppl, "enabled", "defenses.ppl_filter.");
  c.defenses.ppl_filter.threshold = get<double>(ppl, "threshold", "defenses.ppl_filter.");
  c.defenses.ppl_filter.n = get<int>(ppl, "n", "defenses.ppl_filter.");
  c.defenses.ppl_filter.alpha = get<double>(ppl, "alpha", "defenses.ppl_filter.");
  c.defenses.knowledge_expansion_k = get<std::size_t>(def, "knowledge_expansion_k", "defenses.");

  c.repeats = get<int>(doc, "repeats", "");
  c.cases_per_repeat = get<int>(doc, "cases_per_repeat", "");
  c.threads = get<int>(doc, "threads", "");
  c.validate();
  return c;
}

void apply_override(json& doc, std::string_view dotted, std::string_view value) {
  std::string pointer;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const auto dot_pos = dotted.find('.', start);
    const auto part = dotted.substr(start, dot_pos == std::string_view::npos ? std::string_view::npos
                                                                              : dot_pos - start);
    if (part.empty()) throw ConfigError("malformed override key '" + std::string(dotted) + "'");
    pointer += "/";
    for (char ch : part) {
      if (ch == '~') {
        pointer += "~0";
      } else if (ch == '/') {
        pointer += "~1";
      } else {
        pointer += ch;
      }
    }
    if (dot_pos == std::string_view::npos) break;
    start = dot_pos + 1;
  }
  const json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) throw ConfigError("unknown config key '" + std::string(dotted) + "'");
  auto& slot = doc[ptr];
  const std::string v(value);
  try {
    if (slot.is_boolean()) {
      if (v == "true" || v == "1") {
        slot = true;
      } else if (v == "false" || v == "0") {
        slot = false;
      } else {
        throw ConfigError("expected true/false");
      }
    } else if (slot.is_number_unsigned()) {
      std::uint64_t x = 0;
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected an unsigned integer");
      slot = x;
    } else if (slot.is_number_integer()) {
      long long x = 0;
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected an integer");
      slot = x;
    } else if (slot.is_number_float()) {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw ConfigError("expected a number");
      slot = x;
    } else if (slot.is_string()) {
      slot = v;
    } else {
      slot = json::parse(v);  // arrays, objects, null slots
    }
  } catch (const ConfigError& e) {
    throw ConfigError("override '" + std::string(dotted) + "=" + v + "': " + e.what());
  } catch (const std::exception& e) {
    throw ConfigError("override '" + std::string(dotted) + "=" + v + "': " + e.what());
  }
}

}  // namespace prag
