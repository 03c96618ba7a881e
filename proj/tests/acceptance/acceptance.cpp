#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "attack.hpp"
#include "corpus.hpp"
#include "defense.hpp"
#include "embedding.hpp"
#include "evaluation.hpp"
#include "fixture.hpp"
#include "generation.hpp"
#include "json.hpp"
#include "retrieval.hpp"
#include "text.hpp"

using namespace prag;

namespace {

constexpr double kClosedLoopMaxSeconds = 5.0;
constexpr int kRetrievalQueries = 50;
constexpr int kToyInstances = 100;
constexpr double kToyOptimalFraction = 0.95;
constexpr double kToyOptimumTol = 1e-12;
constexpr int kSwapTrials = 1000;
constexpr double kSwapTol = 1e-9;
constexpr double kBaselineMinF1 = 0.9;
constexpr int kAucFixtures = 200;
constexpr double kAucTol = 1e-12;
constexpr std::size_t kExpansionLowK = 5;
constexpr std::size_t kExpansionHighK = 25;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

// Scores every record and sorts the whole list.
std::vector<ScoredId> brute_force(const KnowledgeDatabase& db, const Encoder& enc, SimilarityMetric metric,
                                  const std::string& question, std::size_t k) {
  const auto q = enc.embed(Role::kQuery, question);
  std::vector<ScoredId> all;
  for (const auto& r : db.records()) {
    const auto v = enc.embed(Role::kText, r.text);
    all.push_back({r.id, metric == SimilarityMetric::kDotProduct ? dot(q, v) : cosine(q, v)});
  }
  std::sort(all.begin(), all.end(), [](const ScoredId& a, const ScoredId& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

KnowledgeDatabase poisoned_db(const fixture::Fixture& f, const ExperimentConfig& cfg) {
  std::vector<PoisonText> ps;
  for (const auto& c : f.cases) {
    for (auto& p : craft_blackbox(c, cfg.attack, cfg.generator)) ps.push_back(std::move(p));
  }
  return inject_poisons(f.db(), ps);
}

Outcome closed_loop() {
  const auto f = fixture::main_fixture();
  const auto cfg = fixture::base_config();
  const auto rep = run_experiment(f.db(), f.cases, cfg);
  const auto db = poisoned_db(f, cfg);
  const auto enc = make_encoder(cfg.encoder);
  bool oracle_ok = rep.per_case.size() == f.cases.size();
  for (std::size_t i = 0; oracle_ok && i < f.cases.size(); ++i) {
    const auto& c = f.cases[i];
    const auto& t = rep.per_case[i];
    const auto expected = brute_force(db, enc, cfg.metric, c.question, cfg.k);
    std::size_t own = 0;
    for (std::size_t r = 0; r < expected.size(); ++r) {
      oracle_ok = oracle_ok && expected[r].id == t.retrieved.entries[r].id;
      if (expected[r].id.rfind("poison::" + c.case_id + "::", 0) == 0) ++own;
    }
    // All five contexts assert R and none assert C, so the vote is 5 to 0.
    oracle_ok = oracle_ok && own == 5 && t.matched_target;
  }
  return {rep.asr == 1.0 && rep.f1 == 1.0 && oracle_ok && rep.runtime_seconds < kClosedLoopMaxSeconds,
          fmt("asr=%.3f f1=%.3f oracle=%s runtime=%.2fs (<%.1fs)", rep.asr, rep.f1, oracle_ok ? "agree" : "DISAGREE",
              rep.runtime_seconds, kClosedLoopMaxSeconds)};
}

Outcome no_attack() {
  const auto f = fixture::main_fixture();
  auto cfg = fixture::base_config();
  cfg.attack_kind.reset();
  const auto rep = run_experiment(f.db(), f.cases, cfg);
  return {rep.asr == 0.0, fmt("asr=%.3f matched_correct=%.3f", rep.asr, rep.matched_correct_rate)};
}

Outcome retrieval_exact() {
  const auto f = fixture::main_fixture();
  const auto db = f.db();
  std::mt19937_64 rng(404);
  int mismatches = 0;
  int total = 0;
  for (const auto& enc : {Encoder::feature_hash(512, 3), Encoder::linear_table(32, 3)}) {
    const DenseIndex index(db, enc);
    for (auto metric : {SimilarityMetric::kDotProduct, SimilarityMetric::kCosine}) {
      std::mt19937_64 qrng(rng());
      for (int i = 0; i < kRetrievalQueries; ++i) {
        // Queries mix words from two random records.
        const auto& a = db.records()[qrng() % db.size()].text;
        const auto& b = db.records()[qrng() % db.size()].text;
        const auto wa = text::tokenize(a);
        const auto wb = text::tokenize(b);
        std::string q = wa[qrng() % wa.size()] + " " + wb[qrng() % wb.size()] + " " + wa[0];
        const std::size_t k = 1 + qrng() % 20;
        const auto expected = brute_force(db, enc, metric, q, k);
        const auto got = index.search(q, metric, k);
        bool same = got.entries.size() == expected.size();
        for (std::size_t r = 0; same && r < expected.size(); ++r) {
          same = got.entries[r].id == expected[r].id;
        }
        mismatches += same ? 0 : 1;
        ++total;
      }
    }
  }
  return {mismatches == 0, fmt("%d/%d queries identical to full sort", total - mismatches, total)};
}

Outcome whitebox_toy() {
  std::vector<int> hits;
  int steps = 0;
  int bad_steps = 0;
  for (auto metric : {SimilarityMetric::kDotProduct, SimilarityMetric::kCosine}) {
    int hit = 0;
    for (int inst = 0; inst < kToyInstances; ++inst) {
      std::mt19937_64 rng(1000 + inst);
      std::vector<std::string> vocab;
      for (int i = 0; i < 6; ++i) vocab.push_back("tok" + std::to_string(inst) + "x" + std::to_string(i));
      const auto enc = Encoder::linear_table(4, rng());
      const TargetCase c{"toy", vocab[rng() % 6] + " " + vocab[rng() % 6], "yes", "no"};
      const std::string I = vocab[rng() % 6] + " " + vocab[rng() % 6];
      WhiteboxConfig wb;
      wb.vocabulary = vocab;
      const auto res = optimize_retrieval_text(c, I, enc, metric, wb, 1, inst);
      const auto q = enc.embed(Role::kQuery, c.question);
      const auto itoks = text::tokenize(I);
      double best = -1e300;
      for (const auto& a : vocab) {
        for (const auto& b : vocab) {
          std::vector<std::string> seq{a, b};
          seq.insert(seq.end(), itoks.begin(), itoks.end());
          const auto v = enc.embed_tokens(seq);
          best = std::max(best, metric == SimilarityMetric::kDotProduct ? dot(q, v) : cosine(q, v));
        }
      }
      if (res.objective_trace.back() >= best - kToyOptimumTol) ++hit;
      for (std::size_t s = 1; s < res.objective_trace.size(); ++s) {
        ++steps;
        if (res.objective_trace[s] < res.objective_trace[s - 1]) ++bad_steps;
      }
    }
    hits.push_back(hit);
  }
  bool pass = bad_steps == 0;
  for (int h : hits) pass = pass && h >= kToyOptimalFraction * kToyInstances;
  return {pass, fmt("optimum reached dot %d/%d cosine %d/%d (>= %.0f%%), decreasing steps %d/%d", hits[0],
                    kToyInstances, hits[1], kToyInstances, 100 * kToyOptimalFraction, bad_steps, steps)};
}

Outcome gradient_exact() {
  std::mt19937_64 rng(2718);
  double worst = 0.0;
  int done = 0;
  auto word = [&] {
    std::string w;
    for (int i = 0, n = 2 + static_cast<int>(rng() % 6); i < n; ++i) w.push_back(static_cast<char>('a' + rng() % 26));
    return w;
  };
  while (done < kSwapTrials) {
    const std::size_t dim = 4 + rng() % 60;
    const auto enc = Encoder::linear_table(dim, rng());
    std::vector<std::string> toks;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 8); i < n; ++i) toks.push_back(word());
    const std::vector<std::string> cands{word(), word(), word(), word()};
    const auto q = enc.embed(Role::kQuery, word() + " " + word());
    const auto d = swap_gradient(enc, q, toks, SimilarityMetric::kDotProduct, cands);
    const double base = dot(q, enc.embed_tokens(toks));
    for (std::size_t p = 0; p < toks.size() && done < kSwapTrials; ++p) {
      for (std::size_t c = 0; c < cands.size() && done < kSwapTrials; ++c, ++done) {
        auto swapped = toks;
        swapped[p] = cands[c];
        worst = std::max(worst, std::abs(d.at(p, c) - (dot(q, enc.embed_tokens(swapped)) - base)));
      }
    }
  }
  return {worst <= kSwapTol, fmt("%d swaps, max |closed form - re-embed| = %.2e (<= %.0e)", done, worst, kSwapTol)};
}

Outcome variant_ordering() {
  const auto f = fixture::decoy_fixture();
  const auto db = f.db();
  auto cfg = fixture::base_config();
  const auto full = run_experiment(db, f.cases, cfg);
  cfg.attack_kind = AttackKind::kVariantI;
  const auto ionly = run_experiment(db, f.cases, cfg);
  cfg.attack_kind = AttackKind::kVariantS;
  const auto sonly = run_experiment(db, f.cases, cfg);
  return {full.asr > ionly.asr && sonly.asr == 0.0 && sonly.f1 == 1.0,
          fmt("full asr=%.3f > I-only asr=%.3f; S-only asr=%.3f f1=%.3f", full.asr, ionly.asr, sonly.asr, sonly.f1)};
}

Outcome baseline_contrast() {
  // Corpus poisoning needs gradients, so this fixture run swaps in the linear encoder.
  const auto f = fixture::main_fixture();
  auto cfg = fixture::base_config();
  cfg.encoder.kind = EncoderKind::kLinearTable;
  cfg.encoder.dim = 64;
  cfg.attack_kind = AttackKind::kCorpusPoisoning;
  const auto rep = run_experiment(f.db(), f.cases, cfg);
  return {rep.f1 >= kBaselineMinF1 && rep.asr == 0.0,
          fmt("corpus poisoning f1=%.3f (>= %.1f) asr=%.3f", rep.f1, kBaselineMinF1, rep.asr)};
}

Outcome dedup_direction() {
  const auto f = fixture::main_fixture();
  const auto db = f.db();
  auto cfg = fixture::base_config();
  const auto off = run_experiment(db, f.cases, cfg);
  cfg.defenses.dedup = true;
  const auto on = run_experiment(db, f.cases, cfg);
  cfg.attack_kind = AttackKind::kPromptInjection;
  const auto inj = run_experiment(db, f.cases, cfg);
  const auto expected_inj = static_cast<std::size_t>(f.cases.size() * (cfg.attack.N - 1));
  return {on.defense.dedup_removed_poisons == 0 && on.asr == off.asr &&
              inj.defense.dedup_removed_poisons == expected_inj,
          fmt("black-box removed=%zu asr %.3f -> %.3f; prompt injection removed=%zu (expected %zu)",
              on.defense.dedup_removed_poisons, off.asr, on.asr, inj.defense.dedup_removed_poisons, expected_inj)};
}

Outcome auc_oracle() {
  std::mt19937_64 rng(31337);
  double worst = 0.0;
  for (int t = 0; t < kAucFixtures; ++t) {
    std::vector<double> c(1 + rng() % 40);
    std::vector<double> p(1 + rng() % 40);
    const int levels = 2 + static_cast<int>(rng() % 50);
    for (auto& x : c) x = static_cast<double>(rng() % levels) * 0.25;
    for (auto& x : p) x = static_cast<double>(rng() % levels) * 0.25 + 0.125 * static_cast<double>(rng() % 3);
    double wins = 0.0;
    for (double a : p) {
      for (double b : c) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    }
    worst = std::max(worst, std::abs(roc_auc(c, p).auc - wins / static_cast<double>(c.size() * p.size())));
  }
  const double separated = roc_auc(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5}).auc;
  const double identical = roc_auc(std::vector<double>{2, 2, 2}, std::vector<double>{2, 2}).auc;
  return {worst <= kAucTol && separated == 1.0 && identical == 0.5,
          fmt("%d fixtures max err %.2e (<= %.0e); separated=%.3f identical=%.3f", kAucFixtures, worst, kAucTol,
              separated, identical)};
}

Outcome paraphrase_direction() {
  const auto f = fixture::decoy_fixture();
  const auto db = f.db();
  auto cfg = fixture::base_config();
  const auto plain = run_experiment(db, f.cases, cfg);
  cfg.defenses.paraphrase.enabled = true;
  const auto para = run_experiment(db, f.cases, cfg);
  return {para.recall < plain.recall,
          fmt("recall %.3f -> %.3f with paraphrasing (asr %.3f -> %.3f)", plain.recall, para.recall, plain.asr,
              para.asr)};
}

Outcome knowledge_expansion() {
  const auto f = fixture::main_fixture();
  const auto db = f.db();
  auto cfg = fixture::base_config();
  const int N = cfg.attack.N;
  // Answerable cases hold kAnswerDocs correct statements ranked right after the
  // N poisons. The reader flips once correct contexts outnumber the poisons,
  // i.e. at k = 2N + 1; before that a tie goes to the better-ranked poison.
  const std::size_t crossover = static_cast<std::size_t>(2 * N + 1);
  const double after = static_cast<double>(fixture::kCases - fixture::kAnswerable) / fixture::kCases;
  bool exact = true;
  double asr_low = -1.0;
  double asr_high = -1.0;
  std::size_t observed = 0;
  for (std::size_t k = kExpansionLowK; k <= kExpansionHighK; ++k) {
    cfg.defenses.knowledge_expansion_k = k;
    const double asr = run_experiment(db, f.cases, cfg).asr;
    const double expected = k < crossover ? 1.0 : after;
    exact = exact && asr == expected;
    if (observed == 0 && asr < 1.0) observed = k;
    if (k == kExpansionLowK) asr_low = asr;
    if (k == kExpansionHighK) asr_high = asr;
  }
  return {asr_high <= asr_low && exact && observed == crossover,
          fmt("asr(k=%zu)=%.3f asr(k=%zu)=%.3f crossover k=%zu (expected %zu)", kExpansionLowK, asr_low,
              kExpansionHighK, asr_high, observed, crossover)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  fixture::TempDir dir("acceptance_det");
  const auto f = fixture::main_fixture();
  fixture::write_corpus(f, dir / "corpus.jsonl");
  fixture::write_cases(f, dir / "cases.jsonl");
  auto cfg = to_json(fixture::base_config());
  cfg["corpus"] = (dir / "corpus.jsonl").string();
  cfg["cases"] = (dir / "cases.jsonl").string();
  cfg["defenses"]["ppl_filter"]["enabled"] = true;
  std::ofstream(dir / "config.json") << cfg.dump(2);
  int rc = 0;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("'") + PRAG_CLI_PATH + "' eval -c '" + (dir / "config.json").string() +
                            "' -o '" + (dir / run).string() + "' > /dev/null";
    rc |= std::system(cmd.c_str());
  }
  const auto a = slurp(dir / "a" / "report.json");
  const auto b = slurp(dir / "b" / "report.json");
  return {rc == 0 && !a.empty() && a == b,
          fmt("exit=%d report bytes %zu vs %zu, %s", rc, a.size(), b.size(), a == b ? "identical" : "DIFFERENT")};
}

Outcome sweep_shape() {
  const auto f = fixture::main_fixture();
  std::vector<std::size_t> ks;
  for (std::size_t k = 1; k <= 10; ++k) ks.push_back(k);
  const std::vector<int> ns{1, 2, 3, 4, 5};
  const auto rows = run_sweep(f.db(), f.cases, fixture::base_config(), ks, ns);
  std::map<std::pair<std::size_t, int>, SweepRow> at;
  for (const auto& r : rows) at[{r.k, r.N}] = r;
  int violations = 0;
  int checks = 0;
  for (std::size_t k : ks) {
    for (int n : ns) {
      const auto& r = at.at({k, n});
      if (k + 1 <= ks.back()) {
        const auto& next = at.at({k + 1, n});
        ++checks;
        violations += next.recall >= r.recall ? 0 : 1;
        if (static_cast<int>(k) > n) {
          ++checks;
          violations += next.precision <= r.precision ? 0 : 1;
        }
      }
      if (n + 1 <= ns.back() && n > static_cast<int>(k)) {
        ++checks;
        violations += at.at({k, n + 1}).recall <= r.recall ? 0 : 1;
      }
    }
  }
  return {violations == 0 && rows.size() == ks.size() * ns.size(),
          fmt("%zu grid points, %d/%d monotonicity checks hold", rows.size(), checks - violations, checks)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"closed-loop ASR", closed_loop},
      {"no-attack baseline", no_attack},
      {"retrieval correctness", retrieval_exact},
      {"white-box solver optimality", whitebox_toy},
      {"gradient exactness", gradient_exact},
      {"variant ordering", variant_ordering},
      {"baseline contrast", baseline_contrast},
      {"dedup defense", dedup_direction},
      {"AUC oracle", auc_oracle},
      {"paraphrase defense direction", paraphrase_direction},
      {"knowledge expansion", knowledge_expansion},
      {"determinism", determinism},
      {"k/N sweep shape", sweep_shape},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
