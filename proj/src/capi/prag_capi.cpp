#include "prag/prag.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "attack.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "defense.hpp"
#include "embedding.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "generation.hpp"
#include "parallel.hpp"
#include "retrieval.hpp"
#include "text.hpp"

using nlohmann::json;

struct prag_db {
  prag::KnowledgeDatabase db;
};
struct prag_encoder {
  prag::Encoder encoder;
};
struct prag_cases {
  std::vector<prag::TargetCase> cases;
};
struct prag_poisons {
  std::vector<prag::PoisonText> poisons;
};
struct prag_report {
  prag::EvalReport report;
};

namespace {

thread_local std::string g_last_error;

prag_status status_of(prag::ErrorCode code) { return static_cast<prag_status>(code); }

template <typename Fn>
prag_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return PRAG_OK;
  } catch (const prag::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("JSON: ") + e.what();
    return PRAG_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PRAG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PRAG_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw prag::Error(prag::ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

json parse_json_arg(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw prag::ConfigError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

prag::ExperimentConfig experiment_config(const char* config_json) {
  return prag::experiment_config_from_json(parse_json_arg(config_json, "config"));
}

prag::GeneratorConfig generator_config(const char* generator_json) {
  auto g = prag::generator_config_from_json(parse_json_arg(generator_json, "generator config"));
  g.validate();
  return g;
}

std::vector<std::string> context_list(const char* const* contexts, size_t n) {
  require(n == 0 || contexts != nullptr, "contexts is NULL");
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    require(contexts[i] != nullptr, "context entry is NULL");
    out.emplace_back(contexts[i]);
  }
  return out;
}

json retrieval_to_json(const prag::RetrievalResult& r) {
  json entries = json::array();
  for (const auto& e : r.entries) entries.push_back({{"id", e.id}, {"score", e.score}});
  return {{"k", r.k}, {"entries", entries}};
}

}  // namespace

extern "C" {

const char* prag_version(void) { return "0.1.0"; }

const char* prag_status_name(prag_status status) {
  switch (status) {
    case PRAG_OK: return "ok";
    case PRAG_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case PRAG_ERR_PARSE: return "parse_error";
    case PRAG_ERR_CONFLICT: return "conflict";
    case PRAG_ERR_IO: return "io_error";
    case PRAG_ERR_DOMAIN: return "domain_error";
    case PRAG_ERR_LOOKUP: return "lookup_error";
    case PRAG_ERR_CAPABILITY: return "capability_error";
    case PRAG_ERR_CONFIG: return "config_error";
    case PRAG_ERR_GENERATION: return "generation_error";
    case PRAG_ERR_PROTOCOL: return "protocol_error";
    case PRAG_ERR_EXPERIMENT: return "experiment_error";
    case PRAG_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* prag_last_error(void) { return g_last_error.c_str(); }

void prag_string_free(char* s) { std::free(s); }

prag_status prag_config_resolve(const char* user_json, const char* const* overrides, size_t n_overrides,
                                int require_seed, char** out_json) {
  return guarded([&] {
    require(out_json != nullptr, "out_json is NULL");
    require(n_overrides == 0 || overrides != nullptr, "overrides is NULL");
    const auto user = parse_json_arg(user_json, "config");
    if (require_seed && !user.contains("seed")) throw prag::ConfigError("config must set \"seed\"");
    auto doc = prag::config_document(user);
    for (size_t i = 0; i < n_overrides; ++i) {
      require(overrides[i] != nullptr, "override entry is NULL");
      const std::string_view kv(overrides[i]);
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) {
        throw prag::ConfigError("override '" + std::string(kv) + "' must have the form key=value");
      }
      prag::apply_override(doc, kv.substr(0, eq), kv.substr(eq + 1));
    }
    prag::experiment_config_from_json(doc);  // validation only
    *out_json = dup_string(doc.dump(2));
  });
}

prag_status prag_db_ingest(const char* jsonl_path, prag_db** out) {
  return guarded([&] {
    require(jsonl_path != nullptr && out != nullptr, "NULL argument");
    *out = new prag_db{prag::ingest_corpus(jsonl_path)};
  });
}

prag_status prag_db_load(const char* snapshot_dir, prag_db** out) {
  return guarded([&] {
    require(snapshot_dir != nullptr && out != nullptr, "NULL argument");
    *out = new prag_db{prag::load_snapshot(snapshot_dir)};
  });
}

prag_status prag_db_open(const char* path, prag_db** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "NULL argument");
    *out = new prag_db{std::filesystem::is_directory(path) ? prag::load_snapshot(path)
                                                           : prag::ingest_corpus(path)};
  });
}

prag_status prag_db_save(const prag_db* db, const char* snapshot_dir) {
  return guarded([&] {
    require(db != nullptr && snapshot_dir != nullptr, "NULL argument");
    prag::save_snapshot(db->db, snapshot_dir);
  });
}

prag_status prag_db_size(const prag_db* db, size_t* out) {
  return guarded([&] {
    require(db != nullptr && out != nullptr, "NULL argument");
    *out = db->db.size();
  });
}

prag_status prag_db_snapshot_id(const prag_db* db, char** out) {
  return guarded([&] {
    require(db != nullptr && out != nullptr, "NULL argument");
    *out = dup_string(db->db.snapshot_id());
  });
}

prag_status prag_db_record_json(const prag_db* db, size_t index, char** out_json) {
  return guarded([&] {
    require(db != nullptr && out_json != nullptr, "NULL argument");
    require(index < db->db.size(), "record index out of range");
    *out_json = dup_string(prag::record_to_json(db->db.records()[index]).dump());
  });
}

prag_status prag_db_inject(const prag_db* db, const prag_poisons* poisons, prag_db** out) {
  return guarded([&] {
    require(db != nullptr && poisons != nullptr && out != nullptr, "NULL argument");
    *out = new prag_db{prag::inject_poisons(db->db, poisons->poisons)};
  });
}

prag_status prag_db_dedup(const prag_db* db, prag_db** out, char** removed_json) {
  return guarded([&] {
    require(db != nullptr && out != nullptr, "NULL argument");
    auto result = prag::dedup_filter(db->db);
    std::string removed = json(result.removed).dump();
    auto handle = std::make_unique<prag_db>(prag_db{std::move(result.db)});
    if (removed_json != nullptr) *removed_json = dup_string(removed);
    *out = handle.release();
  });
}

void prag_db_free(prag_db* db) { delete db; }

prag_status prag_encoder_create(const char* encoder_json, prag_encoder** out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    const auto user = parse_json_arg(encoder_json, "encoder config");
    const auto cfg = prag::experiment_config_from_json(json{{"encoder", user}});
    *out = new prag_encoder{prag::make_encoder(cfg.encoder)};
  });
}

prag_status prag_encoder_dim(const prag_encoder* encoder, size_t* out) {
  return guarded([&] {
    require(encoder != nullptr && out != nullptr, "NULL argument");
    *out = encoder->encoder.dim();
  });
}

prag_status prag_encoder_embed(const prag_encoder* encoder, prag_role role, const char* text, double* out,
                               size_t out_len) {
  return guarded([&] {
    require(encoder != nullptr && text != nullptr && out != nullptr, "NULL argument");
    require(out_len == encoder->encoder.dim(), "out_len must equal the encoder dimension");
    const auto v = encoder->encoder.embed(role == PRAG_ROLE_QUERY ? prag::Role::kQuery : prag::Role::kText, text);
    std::copy(v.begin(), v.end(), out);
  });
}

void prag_encoder_free(prag_encoder* encoder) { delete encoder; }

prag_status prag_tokenize(const char* text, char** tokens_json) {
  return guarded([&] {
    require(text != nullptr && tokens_json != nullptr, "NULL argument");
    *tokens_json = dup_string(json(prag::text::tokenize(text)).dump());
  });
}

prag_status prag_similarity(prag_metric metric, const double* u, const double* v, size_t dim, double* out) {
  return guarded([&] {
    require(u != nullptr && v != nullptr && out != nullptr, "NULL argument");
    *out = prag::similarity(metric == PRAG_METRIC_COSINE ? prag::SimilarityMetric::kCosine
                                                         : prag::SimilarityMetric::kDotProduct,
                            std::span<const double>(u, dim), std::span<const double>(v, dim));
  });
}

prag_status prag_retrieve(const prag_db* db, const prag_encoder* encoder, prag_metric metric,
                          const char* question, size_t k, char** result_json) {
  return guarded([&] {
    require(db != nullptr && encoder != nullptr && question != nullptr && result_json != nullptr,
            "NULL argument");
    const auto r = prag::retrieve_top_k(db->db, encoder->encoder,
                                        metric == PRAG_METRIC_COSINE ? prag::SimilarityMetric::kCosine
                                                                     : prag::SimilarityMetric::kDotProduct,
                                        question, k);
    *result_json = dup_string(retrieval_to_json(r).dump());
  });
}

prag_status prag_render_prompt(const char* generator_json, const char* question, const char* const* contexts,
                               size_t n_contexts, char** out) {
  return guarded([&] {
    require(question != nullptr && out != nullptr, "NULL argument");
    *out = dup_string(prag::render_prompt(generator_config(generator_json), question,
                                          context_list(contexts, n_contexts)));
  });
}

prag_status prag_answer(const char* generator_json, const char* question, const char* const* contexts,
                        size_t n_contexts, char** out) {
  return guarded([&] {
    require(question != nullptr && out != nullptr, "NULL argument");
    *out = dup_string(
        prag::answer(generator_config(generator_json), question, context_list(contexts, n_contexts)));
  });
}

prag_status prag_cases_load(const char* jsonl_path, prag_cases** out) {
  return guarded([&] {
    require(jsonl_path != nullptr && out != nullptr, "NULL argument");
    *out = new prag_cases{prag::load_cases(jsonl_path)};
  });
}

prag_status prag_cases_count(const prag_cases* cases, size_t* out) {
  return guarded([&] {
    require(cases != nullptr && out != nullptr, "NULL argument");
    *out = cases->cases.size();
  });
}

void prag_cases_free(prag_cases* cases) { delete cases; }

prag_status prag_poisons_craft(const prag_cases* cases, const char* config_json, prag_poisons** out) {
  return guarded([&] {
    require(cases != nullptr && out != nullptr, "NULL argument");
    const auto cfg = experiment_config(config_json);
    auto result = std::make_unique<prag_poisons>();
    if (cfg.attack_kind && cfg.attack.N > 0) {
      const auto encoder = prag::make_encoder(cfg.encoder);
      std::vector<std::vector<prag::PoisonText>> crafted(cases->cases.size());
      prag::parallel_for(cases->cases.size(), static_cast<std::size_t>(cfg.threads), [&](std::size_t i) {
        crafted[i] = prag::craft(*cfg.attack_kind, cases->cases[i], cfg.attack, cfg.generator, encoder,
                                 cfg.metric);
      });
      for (auto& batch : crafted) {
        for (auto& p : batch) result->poisons.push_back(std::move(p));
      }
    }
    *out = result.release();
  });
}

prag_status prag_poisons_load(const char* jsonl_path, prag_poisons** out) {
  return guarded([&] {
    require(jsonl_path != nullptr && out != nullptr, "NULL argument");
    *out = new prag_poisons{prag::load_poisons(jsonl_path)};
  });
}

prag_status prag_poisons_save(const prag_poisons* poisons, const char* jsonl_path) {
  return guarded([&] {
    require(poisons != nullptr && jsonl_path != nullptr, "NULL argument");
    prag::save_poisons(jsonl_path, poisons->poisons);
  });
}

prag_status prag_poisons_count(const prag_poisons* poisons, size_t* out) {
  return guarded([&] {
    require(poisons != nullptr && out != nullptr, "NULL argument");
    *out = poisons->poisons.size();
  });
}

prag_status prag_poisons_to_json(const prag_poisons* poisons, char** out_json) {
  return guarded([&] {
    require(poisons != nullptr && out_json != nullptr, "NULL argument");
    json arr = json::array();
    for (const auto& p : poisons->poisons) arr.push_back(prag::poison_to_json(p));
    *out_json = dup_string(arr.dump());
  });
}

void prag_poisons_free(prag_poisons* poisons) { delete poisons; }

prag_status prag_roc_auc(const double* clean, size_t n_clean, const double* poison, size_t n_poison,
                         double* auc) {
  return guarded([&] {
    require(clean != nullptr && poison != nullptr && auc != nullptr, "NULL argument");
    *auc = prag::roc_auc(std::span<const double>(clean, n_clean), std::span<const double>(poison, n_poison)).auc;
  });
}

namespace {

json perplexity_table(const prag::KnowledgeDatabase& db, int n, double alpha) {
  const auto lm = prag::train_lm(db, n, alpha);
  json rows = json::array();
  for (const auto& r : db.records()) {
    rows.push_back({{"id", r.id},
                    {"origin", std::string(prag::to_string(r.origin))},
                    {"perplexity", prag::perplexity(lm, r.text)}});
  }
  return rows;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw prag::IoError(path.string(), "cannot open for writing");
  out << content;
  if (!out) throw prag::IoError(path.string(), "write failed");
}

}  // namespace

prag_status prag_perplexity_scores(const prag_db* db, int n, double alpha, char** out_json) {
  return guarded([&] {
    require(db != nullptr && out_json != nullptr, "NULL argument");
    *out_json = dup_string(perplexity_table(db->db, n, alpha).dump());
  });
}

prag_status prag_defend(const prag_db* db, const char* config_json, const char* out_dir, prag_db** out,
                        char** summary_json) {
  return guarded([&] {
    require(db != nullptr && out != nullptr, "NULL argument");
    const auto cfg = experiment_config(config_json);
    json summary = {{"records_before", db->db.size()}};
    prag::KnowledgeDatabase result = db->db;
    std::vector<std::string> removed;
    if (cfg.defenses.dedup) {
      auto d = prag::dedup_filter(result);
      removed = std::move(d.removed);
      result = std::move(d.db);
    }
    summary["dedup_removed"] = removed;
    summary["records_after"] = result.size();

    const auto table = perplexity_table(result, cfg.defenses.ppl_filter.n, cfg.defenses.ppl_filter.alpha);
    std::vector<double> clean;
    std::vector<double> poison;
    for (const auto& row : table) {
      (row["origin"] == "clean" ? clean : poison).push_back(row["perplexity"].get<double>());
    }
    std::optional<prag::RocCurve> roc;
    if (!clean.empty() && !poison.empty()) roc = prag::roc_auc(clean, poison);
    summary["ppl_auc"] = roc ? json(roc->auc) : json(nullptr);

    if (out_dir != nullptr) {
      const std::filesystem::path dir(out_dir);
      std::filesystem::create_directories(dir);
      std::ostringstream ppl;
      for (const auto& row : table) ppl << row.dump() << '\n';
      write_text(dir / "ppl.jsonl", ppl.str());
      if (roc) {
        std::ostringstream csv;
        csv.precision(17);
        csv << "threshold,fpr,tpr\n";
        for (const auto& p : roc->points) csv << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
        write_text(dir / "roc.csv", csv.str());
        write_text(dir / "roc.json", json{{"auc", roc->auc}}.dump(2) + "\n");
      }
      write_text(dir / "defense.json", summary.dump(2) + "\n");
    }
    auto handle = std::make_unique<prag_db>(prag_db{std::move(result)});
    if (summary_json != nullptr) *summary_json = dup_string(summary.dump());
    *out = handle.release();
  });
}

prag_status prag_paraphrase(const char* generator_json, const char* question, int count, char** out_json) {
  return guarded([&] {
    require(question != nullptr && out_json != nullptr, "NULL argument");
    *out_json = dup_string(json(prag::paraphrase_question(generator_config(generator_json), question, count)).dump());
  });
}

prag_status prag_substring_match(const char* generated, const char* target, int* out) {
  return guarded([&] {
    require(generated != nullptr && target != nullptr && out != nullptr, "NULL argument");
    *out = prag::substring_match(generated, target) ? 1 : 0;
  });
}

prag_status prag_eval(const prag_db* db, const prag_cases* cases, const char* config_json, prag_report** out) {
  return guarded([&] {
    require(db != nullptr && cases != nullptr && out != nullptr, "NULL argument");
    *out = new prag_report{prag::run_experiment(db->db, cases->cases, experiment_config(config_json))};
  });
}

prag_status prag_sweep(const prag_db* db, const prag_cases* cases, const char* config_json, const size_t* ks,
                       size_t n_ks, const int* ns, size_t n_ns, const char* out_dir, char** rows_json) {
  return guarded([&] {
    require(db != nullptr && cases != nullptr && ks != nullptr && ns != nullptr, "NULL argument");
    const auto rows = prag::run_sweep(db->db, cases->cases, experiment_config(config_json),
                                      std::span<const std::size_t>(ks, n_ks), std::span<const int>(ns, n_ns));
    if (out_dir != nullptr) prag::emit_sweep(rows, out_dir);
    if (rows_json != nullptr) {
      json arr = json::array();
      for (const auto& r : rows) {
        arr.push_back({{"k", r.k}, {"N", r.N}, {"asr", r.asr}, {"precision", r.precision},
                       {"recall", r.recall}, {"f1", r.f1}});
      }
      *rows_json = dup_string(json{{"rows", arr}}.dump());
    }
  });
}

prag_status prag_report_to_json(const prag_report* report, char** out_json) {
  return guarded([&] {
    require(report != nullptr && out_json != nullptr, "NULL argument");
    *out_json = dup_string(prag::report_to_json(report->report).dump(2));
  });
}

prag_status prag_report_emit(const prag_report* report, const char* out_dir) {
  return guarded([&] {
    require(report != nullptr && out_dir != nullptr, "NULL argument");
    prag::emit_report(report->report, out_dir);
  });
}

prag_status prag_report_load(const char* report_json_path, prag_report** out) {
  return guarded([&] {
    require(report_json_path != nullptr && out != nullptr, "NULL argument");
    *out = new prag_report{prag::load_report(report_json_path)};
  });
}

prag_status prag_report_summary(const prag_report* report, double* asr, double* precision, double* recall,
                                double* f1) {
  return guarded([&] {
    require(report != nullptr, "report is NULL");
    if (asr) *asr = report->report.asr;
    if (precision) *precision = report->report.precision;
    if (recall) *recall = report->report.recall;
    if (f1) *f1 = report->report.f1;
  });
}

prag_status prag_report_runtime(const prag_report* report, double* seconds) {
  return guarded([&] {
    require(report != nullptr && seconds != nullptr, "NULL argument");
    *seconds = report->report.runtime_seconds;
  });
}

void prag_report_free(prag_report* report) { delete report; }

}  // extern "C"
