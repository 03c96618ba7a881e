#include "evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "defense.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "text.hpp"

namespace prag {

using nlohmann::json;

std::optional<std::string> poison_case_of(std::string_view id) {
  constexpr std::string_view kPrefix = "poison::";
  if (id.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  const auto rest = id.substr(kPrefix.size());
  const auto sep = rest.rfind("::");
  if (sep == std::string_view::npos) return std::nullopt;
  return std::string(rest.substr(0, sep));
}

RetrievalMetrics retrieval_metrics(const RetrievalResult& retrieved, std::string_view case_id, int N) {
  if (N < 1) throw DomainError("retrieval metrics need N >= 1");
  if (retrieved.k < 1) throw DomainError("retrieval result has k = 0");
  std::size_t hits = 0;
  for (const auto& e : retrieved.entries) {
    if (poison_case_of(e.id) == case_id) ++hits;
  }
  RetrievalMetrics m;
  m.precision = static_cast<double>(hits) / static_cast<double>(retrieved.k);
  m.recall = static_cast<double>(hits) / static_cast<double>(N);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

bool EvalReport::operator==(const EvalReport& o) const {
  return asr == o.asr && precision == o.precision && recall == o.recall && f1 == o.f1 &&
         matched_correct_rate == o.matched_correct_rate && asr_per_repeat == o.asr_per_repeat &&
         per_case == o.per_case && defense == o.defense && config == o.config;
}

namespace {

std::vector<std::vector<std::size_t>> select_cases(std::size_t total, const ExperimentConfig& cfg) {
  const auto repeats = static_cast<std::size_t>(cfg.repeats);
  if (repeats == 1 && cfg.cases_per_repeat == 0) {
    std::vector<std::size_t> all(total);
    for (std::size_t i = 0; i < total; ++i) all[i] = i;
    return {all};
  }
  const std::size_t per =
      cfg.cases_per_repeat > 0 ? static_cast<std::size_t>(cfg.cases_per_repeat) : total / repeats;
  if (per == 0 || per * repeats > total) {
    throw ConfigError("need " + std::to_string(std::max<std::size_t>(per, 1) * repeats) +
                      " target cases for sampling without replacement, have " + std::to_string(total));
  }
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  text::SplitMix64 rng(text::mix64(cfg.seed ^ 0x5EEDCA5EULL));
  for (std::size_t i = total; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> out(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    out[r].assign(order.begin() + static_cast<std::ptrdiff_t>(r * per),
                  order.begin() + static_cast<std::ptrdiff_t>((r + 1) * per));
  }
  return out;
}

template <typename Fn>
auto staged(const char* stage, const std::string& case_id, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ExperimentError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExperimentError(stage, case_id, e.what());
  }
}

double mean_of(const std::vector<CaseTranscript>& ts, double (*field)(const CaseTranscript&)) {
  if (ts.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : ts) s += field(t);
  return s / static_cast<double>(ts.size());
}

}  // namespace

EvalReport run_experiment(const KnowledgeDatabase& db, std::span<const TargetCase> cases,
                          const ExperimentConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  staged("config", "", [&] {
    cfg.validate();
    for (const auto& c : cases) c.validate();
  });
  const auto encoder = staged("encoder", "", [&] { return make_encoder(cfg.encoder); });
  const int N = cfg.attack_kind ? cfg.attack.N : 0;
  const std::size_t k = cfg.defenses.knowledge_expansion_k > 0 ? cfg.defenses.knowledge_expansion_k : cfg.k;
  const auto threads = static_cast<std::size_t>(cfg.threads);
  const GeneratorConfig paraphraser = cfg.defenses.paraphrase.generator.value_or(cfg.generator);
  AttackConfig attack = cfg.attack;
  attack.N = N;

  EvalReport report;
  report.config = to_json(cfg, true);
  const auto selection = staged("select", "", [&] { return select_cases(cases.size(), cfg); });

  for (std::size_t r = 0; r < selection.size(); ++r) {
    const auto& picked = selection[r];

    std::vector<std::vector<PoisonText>> crafted(picked.size());
    if (N > 0) {
      parallel_for(picked.size(), threads, [&](std::size_t i) {
        const auto& c = cases[picked[i]];
        crafted[i] = staged("craft", c.case_id, [&] {
          return craft(*cfg.attack_kind, c, attack, cfg.generator, encoder, cfg.metric);
        });
      });
    }
    std::vector<PoisonText> poisons;
    for (auto& batch : crafted) {
      for (auto& p : batch) poisons.push_back(std::move(p));
    }
    report.defense.poisons_injected += poisons.size();

    auto poisoned = staged("inject", "", [&] { return inject_poisons(db, poisons); });
    if (cfg.defenses.dedup) {
      auto dedup = dedup_filter(poisoned);
      report.defense.dedup_removed += dedup.removed.size();
      for (const auto& id : dedup.removed) {
        if (poison_case_of(id)) ++report.defense.dedup_removed_poisons;
      }
      poisoned = std::move(dedup.db);
    }
    const DenseIndex index = staged("index", "", [&] { return DenseIndex(poisoned, encoder); });

    std::unordered_map<std::string, double> ppl;
    if (cfg.defenses.ppl_filter.enabled) {
      staged("ppl_filter", "", [&] {
        const auto lm = train_lm(poisoned, cfg.defenses.ppl_filter.n, cfg.defenses.ppl_filter.alpha);
        std::vector<double> clean_scores;
        std::vector<double> poison_scores;
        for (const auto& rec : poisoned.records()) {
          const double s = perplexity(lm, rec.text);
          ppl.emplace(rec.id, s);
          (rec.origin == Origin::kClean ? clean_scores : poison_scores).push_back(s);
        }
        if (r == 0 && !clean_scores.empty() && !poison_scores.empty()) {
          report.defense.ppl_auc = roc_auc(clean_scores, poison_scores).auc;
        }
      });
    }

    std::vector<std::vector<CaseTranscript>> per_case(picked.size());
    parallel_for(picked.size(), threads, [&](std::size_t i) {
      const auto& c = cases[picked[i]];
      std::vector<std::string> queries{c.question};
      if (cfg.defenses.paraphrase.enabled) {
        queries = staged("paraphrase", c.case_id, [&] {
          return paraphrase_question(paraphraser, c.question, cfg.defenses.paraphrase.count);
        });
      }
      for (const auto& query : queries) {
        CaseTranscript t;
        t.repeat = static_cast<int>(r);
        t.case_id = c.case_id;
        t.query = query;
        t.retrieved = staged("retrieve", c.case_id, [&] { return index.search(query, cfg.metric, k); });
        std::vector<std::string> contexts;
        for (const auto& e : t.retrieved.entries) {
          if (poison_case_of(e.id) == c.case_id) ++t.retrieved_poison_count;
          if (cfg.defenses.ppl_filter.enabled && ppl.at(e.id) >= cfg.defenses.ppl_filter.threshold) {
            t.filtered_out.push_back(e.id);
            continue;
          }
          contexts.push_back(poisoned.find(e.id)->text);
        }
        t.generated_answer = staged("generate", c.case_id, [&] { return answer(cfg.generator, query, contexts); });
        t.matched_target = substring_match(t.generated_answer, c.target_answer);
        t.matched_correct = substring_match(t.generated_answer, c.correct_answer);
        if (N > 0) t.metrics = retrieval_metrics(t.retrieved, c.case_id, N);
        per_case[i].push_back(std::move(t));
      }
    });

    std::vector<CaseTranscript> repeat_transcripts;
    for (auto& batch : per_case) {
      for (auto& t : batch) repeat_transcripts.push_back(std::move(t));
    }
    std::stable_sort(repeat_transcripts.begin(), repeat_transcripts.end(),
                     [](const CaseTranscript& a, const CaseTranscript& b) { return a.case_id < b.case_id; });
    report.asr_per_repeat.push_back(
        mean_of(repeat_transcripts, [](const CaseTranscript& t) { return t.matched_target ? 1.0 : 0.0; }));
    for (const auto& t : repeat_transcripts) report.defense.ppl_filtered += t.filtered_out.size();
    for (auto& t : repeat_transcripts) report.per_case.push_back(std::move(t));
  }

  const auto& all = report.per_case;
  report.asr = mean_of(all, [](const CaseTranscript& t) { return t.matched_target ? 1.0 : 0.0; });
  report.matched_correct_rate =
      mean_of(all, [](const CaseTranscript& t) { return t.matched_correct ? 1.0 : 0.0; });
  report.precision = mean_of(all, [](const CaseTranscript& t) { return t.metrics.precision; });
  report.recall = mean_of(all, [](const CaseTranscript& t) { return t.metrics.recall; });
  report.f1 = mean_of(all, [](const CaseTranscript& t) { return t.metrics.f1; });
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::vector<SweepRow> run_sweep(const KnowledgeDatabase& db, std::span<const TargetCase> cases,
                                const ExperimentConfig& base, std::span<const std::size_t> ks,
                                std::span<const int> Ns) {
  std::vector<SweepRow> rows;
  for (const auto k : ks) {
    for (const int n : Ns) {
      auto cfg = base;
      cfg.k = k;
      cfg.attack.N = n;
      const auto rep = run_experiment(db, cases, cfg);
      rows.push_back({k, n, rep.asr, rep.precision, rep.recall, rep.f1});
    }
  }
  return rows;
}

json report_to_json(const EvalReport& report) {
  json cases = json::array();
  for (const auto& t : report.per_case) {
    json retrieved = json::array();
    for (const auto& e : t.retrieved.entries) retrieved.push_back({{"id", e.id}, {"score", e.score}});
    cases.push_back({{"repeat", t.repeat},
                     {"case_id", t.case_id},
                     {"query", t.query},
                     {"k", t.retrieved.k},
                     {"retrieved", retrieved},
                     {"filtered_out", t.filtered_out},
                     {"retrieved_poison_count", t.retrieved_poison_count},
                     {"generated_answer", t.generated_answer},
                     {"matched_target", t.matched_target},
                     {"matched_correct", t.matched_correct},
                     {"precision", t.metrics.precision},
                     {"recall", t.metrics.recall},
                     {"f1", t.metrics.f1}});
  }
  json defense = {{"poisons_injected", report.defense.poisons_injected},
                  {"dedup_removed", report.defense.dedup_removed},
                  {"dedup_removed_poisons", report.defense.dedup_removed_poisons},
                  {"ppl_filtered", report.defense.ppl_filtered},
                  {"ppl_auc", report.defense.ppl_auc ? json(*report.defense.ppl_auc) : json(nullptr)}};
  return {{"config", report.config},
          {"aggregate",
           {{"asr", report.asr},
            {"precision", report.precision},
            {"recall", report.recall},
            {"f1", report.f1},
            {"matched_correct_rate", report.matched_correct_rate},
            {"cases", report.per_case.size()},
            {"asr_per_repeat", report.asr_per_repeat}}},
          {"defense_metrics", defense},
          {"per_case", cases}};
}

EvalReport report_from_json(const json& doc) {
  EvalReport r;
  try {
    r.config = doc.at("config");
    const auto& agg = doc.at("aggregate");
    r.asr = agg.at("asr").get<double>();
    r.precision = agg.at("precision").get<double>();
    r.recall = agg.at("recall").get<double>();
    r.f1 = agg.at("f1").get<double>();
    r.matched_correct_rate = agg.at("matched_correct_rate").get<double>();
    r.asr_per_repeat = agg.at("asr_per_repeat").get<std::vector<double>>();
    const auto& d = doc.at("defense_metrics");
    r.defense.poisons_injected = d.at("poisons_injected").get<std::size_t>();
    r.defense.dedup_removed = d.at("dedup_removed").get<std::size_t>();
    r.defense.dedup_removed_poisons = d.at("dedup_removed_poisons").get<std::size_t>();
    r.defense.ppl_filtered = d.at("ppl_filtered").get<std::size_t>();
    if (!d.at("ppl_auc").is_null()) r.defense.ppl_auc = d.at("ppl_auc").get<double>();
    for (const auto& c : doc.at("per_case")) {
      CaseTranscript t;
      t.repeat = c.at("repeat").get<int>();
      t.case_id = c.at("case_id").get<std::string>();
      t.query = c.at("query").get<std::string>();
      t.retrieved.k = c.at("k").get<std::size_t>();
      for (const auto& e : c.at("retrieved")) {
        t.retrieved.entries.push_back({e.at("id").get<std::string>(), e.at("score").get<double>()});
      }
      t.filtered_out = c.at("filtered_out").get<std::vector<std::string>>();
      t.retrieved_poison_count = c.at("retrieved_poison_count").get<std::size_t>();
      t.generated_answer = c.at("generated_answer").get<std::string>();
      t.matched_target = c.at("matched_target").get<bool>();
      t.matched_correct = c.at("matched_correct").get<bool>();
      t.metrics = {c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("f1").get<double>()};
      r.per_case.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << content;
  if (!out) throw IoError(path.string(), "write failed");
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());
}

}  // namespace

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_file(dir / "report.json", report_to_json(report).dump(2) + "\n");

  const auto& atk = report.config.contains("attack") ? report.config["attack"] : json::object();
  std::ostringstream agg;
  agg << kAggregateCsvHeader << '\n'
      << csv_escape(atk.value("kind", std::string("unknown"))) << ','
      << report.config.value("k", 0) << ',' << atk.value("N", 0) << ',' << report.per_case.size() << ','
      << fmt_double(report.asr) << ',' << fmt_double(report.precision) << ','
      << fmt_double(report.recall) << ',' << fmt_double(report.f1) << ','
      << fmt_double(report.matched_correct_rate) << '\n';
  write_file(dir / "aggregate.csv", agg.str());

  std::ostringstream pc;
  pc << kPerCaseCsvHeader << '\n';
  for (const auto& t : report.per_case) {
    pc << t.repeat << ',' << csv_escape(t.case_id) << ',' << csv_escape(t.query) << ','
       << t.retrieved_poison_count << ',' << csv_escape(t.generated_answer) << ','
       << (t.matched_target ? 1 : 0) << ',' << (t.matched_correct ? 1 : 0) << ','
       << fmt_double(t.metrics.precision) << ',' << fmt_double(t.metrics.recall) << ','
       << fmt_double(t.metrics.f1) << '\n';
  }
  write_file(dir / "per_case.csv", pc.str());
  write_file(dir / "timing.json", json{{"runtime_seconds", report.runtime_seconds}}.dump(2) + "\n");
}

EvalReport load_report(const std::filesystem::path& report_json) {
  std::ifstream in(report_json, std::ios::binary);
  if (!in) throw IoError(report_json.string(), "cannot open for reading");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(0, report_json.string() + ": " + e.what());
  }
  return report_from_json(doc);
}

void emit_sweep(std::span<const SweepRow> rows, const std::filesystem::path& dir) {
  ensure_dir(dir);
  json arr = json::array();
  std::ostringstream csv;
  csv << kSweepCsvHeader << '\n';
  std::map<int, std::vector<const SweepRow*>> by_n;
  for (const auto& r : rows) {
    arr.push_back({{"k", r.k}, {"N", r.N}, {"asr", r.asr}, {"precision", r.precision},
                   {"recall", r.recall}, {"f1", r.f1}});
    csv << r.k << ',' << r.N << ',' << fmt_double(r.asr) << ',' << fmt_double(r.precision) << ','
        << fmt_double(r.recall) << ',' << fmt_double(r.f1) << '\n';
    by_n[r.N].push_back(&r);
  }
  write_file(dir / "sweep.json", json{{"rows", arr}}.dump(2) + "\n");
  write_file(dir / "sweep.csv", csv.str());

  std::ostringstream dat;
  bool first = true;
  for (const auto& [n, block] : by_n) {
    if (!first) dat << "\n\n";
    first = false;
    dat << "# N=" << n << "\n# k asr precision recall f1\n";
    for (const auto* r : block) {
      dat << r->k << ' ' << fmt_double(r->asr) << ' ' << fmt_double(r->precision) << ' '
          << fmt_double(r->recall) << ' ' << fmt_double(r->f1) << '\n';
    }
  }
  write_file(dir / "sweep.dat", dat.str());
}

}  // namespace prag
