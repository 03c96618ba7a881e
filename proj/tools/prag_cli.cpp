#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "prag/prag.h"

using nlohmann::json;

namespace {

struct Failure {
  prag_status status;
  std::string message;
};

void check(prag_status st) {
  if (st != PRAG_OK) throw Failure{st, prag_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  prag_string_free(s);
  return out;
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { Free(p); p = nullptr; return &p; }
};

using Db = Handle<prag_db, prag_db_free>;
using Cases = Handle<prag_cases, prag_cases_free>;
using Poisons = Handle<prag_poisons, prag_poisons_free>;
using Encoder = Handle<prag_encoder, prag_encoder_free>;
using Report = Handle<prag_report, prag_report_free>;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{PRAG_ERR_IO, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Turns leftover "--a.b=v" / "--a.b v" arguments into "a.b=v" overrides.
std::vector<std::string> collect_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) {
      throw Failure{PRAG_ERR_INVALID_ARGUMENT, "unexpected argument '" + arg + "'"};
    }
    std::string body = arg.substr(2);
    if (body.find('=') == std::string::npos) {
      if (i + 1 >= extras.size()) {
        throw Failure{PRAG_ERR_INVALID_ARGUMENT, "override " + arg + " needs a value"};
      }
      body += "=" + extras[++i];
    }
    out.push_back(std::move(body));
  }
  return out;
}

json resolve_config(const std::string& path, const std::vector<std::string>& extras, bool require_seed) {
  const std::string user = path.empty() ? "{}" : read_file(path);
  const auto overrides = collect_overrides(extras);
  std::vector<const char*> argv;
  for (const auto& o : overrides) argv.push_back(o.c_str());
  char* resolved = nullptr;
  check(prag_config_resolve(user.c_str(), argv.data(), argv.size(), require_seed ? 1 : 0, &resolved));
  return json::parse(take(resolved));
}

std::string config_path(const json& cfg, const char* key, const std::string& flag) {
  if (!flag.empty()) return flag;
  const auto v = cfg.value(key, std::string());
  if (v.empty()) throw Failure{PRAG_ERR_CONFIG, std::string("no ") + key + " given (config or flag)"};
  return v;
}

std::vector<std::size_t> parse_ks(const std::string& list) {
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stoul(item));
  return out;
}

std::vector<int> parse_ns(const std::string& list) {
  std::vector<int> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stoi(item));
  return out;
}

void print_summary(const prag_report* report) {
  double asr = 0, p = 0, r = 0, f1 = 0;
  check(prag_report_summary(report, &asr, &p, &r, &f1));
  std::printf("asr=%.4f precision=%.4f recall=%.4f f1=%.4f\n", asr, p, r, f1);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-poisoning testbed for retrieval-augmented generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", prag_version());

  std::string config;
  std::string corpus, cases_path, db_path, out, poisons_path, question, report_path;
  std::string ks = "1,2,3,4,5,6,7,8,9,10";
  std::string ns = "1,2,3,4,5";

  auto* ingest = app.add_subcommand("ingest", "Load a corpus JSONL into a snapshot directory");
  ingest->add_option("corpus", corpus, "Corpus JSONL")->required();
  ingest->add_option("-o,--out", out, "Snapshot directory")->required();

  auto* poison = app.add_subcommand("poison", "Craft poisoned texts and write them as JSONL");
  poison->add_option("-c,--config", config, "Config JSON");
  poison->add_option("--cases-file", cases_path, "Target cases JSONL (defaults to config cases)");
  poison->add_option("-o,--out", out, "Output poison JSONL")->required();

  auto* inject = app.add_subcommand("inject", "Add poisons to a database snapshot");
  inject->add_option("--db", db_path, "Snapshot directory or corpus JSONL")->required();
  inject->add_option("--poisons", poisons_path, "Poison JSONL")->required();
  inject->add_option("-o,--out", out, "Output snapshot directory")->required();

  auto* retrieve = app.add_subcommand("retrieve", "Print the top-k records for a question");
  retrieve->add_option("-c,--config", config, "Config JSON");
  retrieve->add_option("--db", db_path, "Snapshot directory or corpus JSONL (defaults to config corpus)");
  retrieve->add_option("-q,--question", question, "Question text")->required();

  auto* eval = app.add_subcommand("eval", "Run a full attack/defense experiment");
  eval->add_option("-c,--config", config, "Config JSON (must set seed)")->required();
  eval->add_option("-o,--out", out, "Report directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Run experiments over a grid of k and N");
  sweep->add_option("-c,--config", config, "Config JSON (must set seed)")->required();
  sweep->add_option("--ks", ks, "Comma-separated k values");
  sweep->add_option("--ns", ns, "Comma-separated N values");
  sweep->add_option("-o,--out", out, "Sweep output directory")->required();

  auto* defend = app.add_subcommand("defend", "Apply database defenses and score perplexity");
  defend->add_option("-c,--config", config, "Config JSON");
  defend->add_option("--db", db_path, "Snapshot directory or corpus JSONL")->required();
  defend->add_option("-o,--out", out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Summarize a report.json");
  report->add_option("report", report_path, "report.json path")->required();
  bool as_json = false;
  report->add_flag("--json", as_json, "Print the full report");

  for (auto* sub : {poison, retrieve, eval, sweep, defend}) sub->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (ingest->parsed()) {
      Db db;
      check(prag_db_ingest(corpus.c_str(), db.out()));
      check(prag_db_save(db.p, out.c_str()));
      size_t n = 0;
      check(prag_db_size(db.p, &n));
      char* id = nullptr;
      check(prag_db_snapshot_id(db.p, &id));
      std::printf("records=%zu snapshot=%s\n", n, take(id).c_str());
    } else if (poison->parsed()) {
      const auto cfg = resolve_config(config, poison->remaining(), false);
      Cases cases;
      check(prag_cases_load(config_path(cfg, "cases", cases_path).c_str(), cases.out()));
      Poisons poisons;
      check(prag_poisons_craft(cases.p, cfg.dump().c_str(), poisons.out()));
      check(prag_poisons_save(poisons.p, out.c_str()));
      size_t n = 0;
      check(prag_poisons_count(poisons.p, &n));
      std::printf("poisons=%zu\n", n);
    } else if (inject->parsed()) {
      Db db, injected;
      Poisons poisons;
      check(prag_db_open(db_path.c_str(), db.out()));
      check(prag_poisons_load(poisons_path.c_str(), poisons.out()));
      check(prag_db_inject(db.p, poisons.p, injected.out()));
      check(prag_db_save(injected.p, out.c_str()));
      size_t n = 0;
      check(prag_db_size(injected.p, &n));
      std::printf("records=%zu\n", n);
    } else if (retrieve->parsed()) {
      const auto cfg = resolve_config(config, retrieve->remaining(), false);
      Db db;
      check(prag_db_open(config_path(cfg, "corpus", db_path).c_str(), db.out()));
      Encoder enc;
      check(prag_encoder_create(cfg["encoder"].dump().c_str(), enc.out()));
      const auto metric = cfg["metric"] == "cosine" ? PRAG_METRIC_COSINE : PRAG_METRIC_DOT_PRODUCT;
      char* result = nullptr;
      check(prag_retrieve(db.p, enc.p, metric, question.c_str(), cfg["k"].get<size_t>(), &result));
      std::printf("%s\n", json::parse(take(result)).dump(2).c_str());
    } else if (eval->parsed()) {
      const auto cfg = resolve_config(config, eval->remaining(), true);
      Db db;
      Cases cases;
      check(prag_db_open(config_path(cfg, "corpus", "").c_str(), db.out()));
      check(prag_cases_load(config_path(cfg, "cases", "").c_str(), cases.out()));
      Report rep;
      check(prag_eval(db.p, cases.p, cfg.dump().c_str(), rep.out()));
      check(prag_report_emit(rep.p, out.c_str()));
      print_summary(rep.p);
    } else if (sweep->parsed()) {
      const auto cfg = resolve_config(config, sweep->remaining(), true);
      Db db;
      Cases cases;
      check(prag_db_open(config_path(cfg, "corpus", "").c_str(), db.out()));
      check(prag_cases_load(config_path(cfg, "cases", "").c_str(), cases.out()));
      const auto kv = parse_ks(ks);
      const auto nv = parse_ns(ns);
      char* rows = nullptr;
      check(prag_sweep(db.p, cases.p, cfg.dump().c_str(), kv.data(), kv.size(), nv.data(), nv.size(),
                       out.c_str(), &rows));
      for (const auto& r : json::parse(take(rows))["rows"]) {
        std::printf("k=%zu N=%d asr=%.4f precision=%.4f recall=%.4f f1=%.4f\n", r["k"].get<size_t>(),
                    r["N"].get<int>(), r["asr"].get<double>(), r["precision"].get<double>(),
                    r["recall"].get<double>(), r["f1"].get<double>());
      }
    } else if (defend->parsed()) {
      const auto cfg = resolve_config(config, defend->remaining(), false);
      Db db, defended;
      check(prag_db_open(db_path.c_str(), db.out()));
      char* summary = nullptr;
      check(prag_defend(db.p, cfg.dump().c_str(), out.c_str(), defended.out(), &summary));
      check(prag_db_save(defended.p, (out + "/snapshot").c_str()));
      std::printf("%s\n", json::parse(take(summary)).dump(2).c_str());
    } else if (report->parsed()) {
      Report rep;
      check(prag_report_load(report_path.c_str(), rep.out()));
      if (as_json) {
        char* text = nullptr;
        check(prag_report_to_json(rep.p, &text));
        std::printf("%s\n", take(text).c_str());
      } else {
        print_summary(rep.p);
      }
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "prag: %s: %s\n", prag_status_name(f.status), f.message.c_str());
    return f.status == PRAG_ERR_CONFIG || f.status == PRAG_ERR_INVALID_ARGUMENT ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "prag: %s\n", e.what());
    return 2;
  }
  return 0;
}
