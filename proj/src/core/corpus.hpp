#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "poison.hpp"

namespace prag {

enum class Origin { kClean, kPoison };

std::string_view to_string(Origin origin);

struct TextRecord {
  std::string id;
  std::string text;
  Origin origin = Origin::kClean;
  std::optional<std::string> source_case;  // set iff origin == kPoison
  nlohmann::json metadata = nlohmann::json::object();

  bool operator==(const TextRecord&) const = default;
};

/// Immutable snapshot of the knowledge database.
///
/// Clean records keep their insertion order; poison records follow, sorted
/// by id. Copies share storage, so passing by value is cheap and all
/// "mutating" operations return a new snapshot.
class KnowledgeDatabase {
 public:
  KnowledgeDatabase();

  // Validates record invariants and applies the canonical ordering.
  // Throws ConflictError on a repeated id, DomainError on an invalid record.
  static KnowledgeDatabase from_records(std::vector<TextRecord> records);

  std::span<const TextRecord> records() const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  const std::string& snapshot_id() const;

  const TextRecord* find(std::string_view id) const;
  std::size_t clean_count() const;

  bool operator==(const KnowledgeDatabase& other) const;

 private:
  struct Data;
  explicit KnowledgeDatabase(std::shared_ptr<const Data> data);
  std::shared_ptr<const Data> data_;
};

// Content hash over ids and texts, in order.
std::string compute_snapshot_id(std::span<const TextRecord> records);

// JSON-lines with string "id" (or BEIR-style "_id") and "text"; other keys are
// kept as metadata.
KnowledgeDatabase ingest_corpus(const std::filesystem::path& path);

KnowledgeDatabase inject_poisons(const KnowledgeDatabase& db, std::span<const PoisonText> poisons);

struct DedupResult {
  KnowledgeDatabase db;
  std::vector<std::string> removed;
};

// Drops every record whose SHA-256 text digest was already seen earlier in
// database order.
DedupResult dedup_filter(const KnowledgeDatabase& db);

// Directory layout: records.jsonl + meta.json{snapshot_id, records, format}.
void save_snapshot(const KnowledgeDatabase& db, const std::filesystem::path& dir);
KnowledgeDatabase load_snapshot(const std::filesystem::path& dir);

nlohmann::json record_to_json(const TextRecord& record);

}  // namespace prag
