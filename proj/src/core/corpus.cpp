#include "corpus.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "errors.hpp"
#include "text.hpp"

namespace prag {

using nlohmann::json;

std::string_view to_string(Origin origin) {
  return origin == Origin::kClean ? "clean" : "poison";
}

struct KnowledgeDatabase::Data {
  std::vector<TextRecord> records;
  std::unordered_map<std::string, std::size_t> index;
  std::string snapshot_id;
  std::size_t clean = 0;
};

KnowledgeDatabase::KnowledgeDatabase() : KnowledgeDatabase(from_records({})) {}

KnowledgeDatabase::KnowledgeDatabase(std::shared_ptr<const Data> data) : data_(std::move(data)) {}

KnowledgeDatabase KnowledgeDatabase::from_records(std::vector<TextRecord> records) {
  auto data = std::make_shared<Data>();
  std::vector<TextRecord> poisons;
  for (auto& r : records) {
    if (r.id.empty()) throw DomainError("record id must be non-empty");
    if (r.text.empty()) throw DomainError("record '" + r.id + "' has empty text");
    if ((r.origin == Origin::kPoison) != r.source_case.has_value()) {
      throw DomainError("record '" + r.id + "': source_case must be set iff origin is poison");
    }
    if (r.origin == Origin::kClean && r.id.starts_with("poison::")) {
      throw DomainError("clean record id '" + r.id + "' uses the reserved poison:: prefix");
    }
    if (r.origin == Origin::kPoison) {
      poisons.push_back(std::move(r));
    } else {
      data->records.push_back(std::move(r));
    }
  }
  data->clean = data->records.size();
  std::stable_sort(poisons.begin(), poisons.end(),
                   [](const TextRecord& a, const TextRecord& b) { return a.id < b.id; });
  for (auto& p : poisons) data->records.push_back(std::move(p));

  data->index.reserve(data->records.size());
  for (std::size_t i = 0; i < data->records.size(); ++i) {
    if (!data->index.emplace(data->records[i].id, i).second) {
      throw ConflictError(data->records[i].id);
    }
  }
  data->snapshot_id = compute_snapshot_id(data->records);
  return KnowledgeDatabase(std::move(data));
}

std::span<const TextRecord> KnowledgeDatabase::records() const { return data_->records; }
std::size_t KnowledgeDatabase::size() const { return data_->records.size(); }
const std::string& KnowledgeDatabase::snapshot_id() const { return data_->snapshot_id; }
std::size_t KnowledgeDatabase::clean_count() const { return data_->clean; }

const TextRecord* KnowledgeDatabase::find(std::string_view id) const {
  auto it = data_->index.find(std::string(id));
  return it == data_->index.end() ? nullptr : &data_->records[it->second];
}

bool KnowledgeDatabase::operator==(const KnowledgeDatabase& other) const {
  return data_ == other.data_ ||
         (data_->snapshot_id == other.data_->snapshot_id && data_->records == other.data_->records);
}

std::string compute_snapshot_id(std::span<const TextRecord> records) {
  std::string content;
  for (const auto& r : records) {
    content += std::to_string(r.id.size());
    content += ':';
    content += r.id;
    content += std::to_string(r.text.size());
    content += ':';
    content += r.text;
  }
  return text::sha256_hex(content);
}

namespace {

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; });
}

// Parses one JSONL object into a record. `allow_origin` accepts the extra
// origin/source_case keys written by save_snapshot.
TextRecord parse_record_line(const std::string& line, std::size_t line_no, bool allow_origin) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line_no, "expected a JSON object");

  const char* id_key = obj.contains("id") ? "id" : (obj.contains("_id") ? "_id" : nullptr);
  if (id_key == nullptr || !obj[id_key].is_string()) {
    throw ParseError(line_no, "missing string field \"id\"");
  }
  if (!obj.contains("text") || !obj["text"].is_string()) {
    throw ParseError(line_no, "missing string field \"text\"");
  }
  TextRecord r;
  r.id = obj[id_key].get<std::string>();
  r.text = obj["text"].get<std::string>();
  if (r.id.empty()) throw ParseError(line_no, "empty id");
  if (r.text.empty()) throw ParseError(line_no, "empty text for id '" + r.id + "'");
  obj.erase(id_key);
  obj.erase("text");

  if (allow_origin) {
    if (obj.contains("origin")) {
      const auto origin = obj["origin"].get<std::string>();
      if (origin == "poison") {
        r.origin = Origin::kPoison;
      } else if (origin != "clean") {
        throw ParseError(line_no, "unknown origin '" + origin + "'");
      }
      obj.erase("origin");
    }
    if (obj.contains("source_case")) {
      r.source_case = obj["source_case"].get<std::string>();
      obj.erase("source_case");
    }
    if ((r.origin == Origin::kPoison) != r.source_case.has_value()) {
      throw ParseError(line_no, "source_case must be present iff origin is poison");
    }
  }
  r.metadata = std::move(obj);
  return r;
}

std::vector<TextRecord> read_records(const std::filesystem::path& path, bool allow_origin) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::vector<TextRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto r = parse_record_line(line, line_no, allow_origin);
    if (!seen.insert(r.id).second) throw ConflictError(r.id);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

KnowledgeDatabase ingest_corpus(const std::filesystem::path& path) {
  return KnowledgeDatabase::from_records(read_records(path, false));
}

KnowledgeDatabase inject_poisons(const KnowledgeDatabase& db, std::span<const PoisonText> poisons) {
  if (poisons.empty()) return db;
  std::vector<TextRecord> records(db.records().begin(), db.records().end());
  records.reserve(records.size() + poisons.size());
  for (const auto& p : poisons) {
    if (p.case_id.empty()) throw DomainError("poison has empty case_id");
    if (p.j < 1) throw DomainError("poison index j must be >= 1");
    TextRecord r;
    r.id = p.id();
    r.text = p.composed;
    r.origin = Origin::kPoison;
    r.source_case = p.case_id;
    records.push_back(std::move(r));
  }
  return KnowledgeDatabase::from_records(std::move(records));
}

DedupResult dedup_filter(const KnowledgeDatabase& db) {
  std::unordered_set<std::string> digests;
  std::vector<TextRecord> kept;
  DedupResult result;
  for (const auto& r : db.records()) {
    if (digests.insert(text::sha256_hex(r.text)).second) {
      kept.push_back(r);
    } else {
      result.removed.push_back(r.id);
    }
  }
  result.db = result.removed.empty() ? db : KnowledgeDatabase::from_records(std::move(kept));
  return result;
}

json record_to_json(const TextRecord& record) {
  json obj = record.metadata.is_object() ? record.metadata : json::object();
  obj["id"] = record.id;
  obj["text"] = record.text;
  obj["origin"] = std::string(to_string(record.origin));
  if (record.source_case) obj["source_case"] = *record.source_case;
  return obj;
}

void save_snapshot(const KnowledgeDatabase& db, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());
  const auto records_path = dir / "records.jsonl";
  {
    std::ofstream out(records_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(records_path.string(), "cannot open for writing");
    for (const auto& r : db.records()) out << record_to_json(r).dump() << '\n';
    if (!out) throw IoError(records_path.string(), "write failed");
  }
  const auto meta_path = dir / "meta.json";
  std::ofstream meta(meta_path, std::ios::binary | std::ios::trunc);
  if (!meta) throw IoError(meta_path.string(), "cannot open for writing");
  meta << json{{"format", 1}, {"records", db.size()}, {"snapshot_id", db.snapshot_id()}}.dump(2)
       << '\n';
  if (!meta) throw IoError(meta_path.string(), "write failed");
}

KnowledgeDatabase load_snapshot(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  std::ifstream meta_in(meta_path, std::ios::binary);
  if (!meta_in) throw IoError(meta_path.string(), "cannot open for reading");
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::parse_error& e) {
    throw ParseError(1, meta_path.string() + ": " + e.what());
  }
  auto db = KnowledgeDatabase::from_records(read_records(dir / "records.jsonl", true));
  if (meta.value("snapshot_id", std::string()) != db.snapshot_id()) {
    throw IoError(dir.string(), "snapshot_id in meta.json does not match records.jsonl");
  }
  return db;
}

}  // namespace prag
