#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace sweep {

using json = nlohmann::json;

enum class Collection { simulators, parameter_sets, runs, analyzers, analyses, hosts };

inline constexpr Collection kAllCollections[] = {Collection::simulators, Collection::parameter_sets,
                                                 Collection::runs,       Collection::analyzers,
                                                 Collection::analyses,   Collection::hosts};

std::string_view to_string(Collection c);
Collection parse_collection(std::string_view text);

struct Query {
  /// Field equality constraints, all of which must hold.
  std::vector<std::pair<std::string, json>> equals;
  std::string sort_by = "created_at";
  bool descending = false;
  std::size_t offset = 0;
  std::optional<std::size_t> limit;

  Query& where(std::string field, json value) {
    equals.emplace_back(std::move(field), std::move(value));
    return *this;
  }
};

/// Embedded document store: one canonical-JSON file per document under
/// <root>/<collection>/<id>.json, unique indexes as key files under
/// <root>/<collection>/_idx/. Every mutation happens under an exclusive
/// flock on <root>/.lock so separate processes sharing a root are safe.
/// Readers never lock; documents are replaced by atomic rename.
///
/// The store owns two bookkeeping fields: "id" (assigned on insert when
/// empty) and "_rev" (1 on insert, incremented by every replacement).
class DocumentStore {
 public:
  explicit DocumentStore(std::filesystem::path root, bool durable = true);

  const std::filesystem::path& root() const { return root_; }

  /// Compact JSON with sorted keys; the on-disk form of every document.
  static std::string canonical(const json& doc);

  std::string new_id();

  /// Inserts a new document. Throws Error(duplicate_key) on an id or unique
  /// index collision.
  std::string put(Collection c, json doc);

  /// Throws Error(not_found).
  json get(Collection c, std::string_view id) const;
  std::optional<json> find(Collection c, std::string_view id) const;

  std::vector<json> query(Collection c, const Query& q = {}) const;
  std::size_t count(Collection c, const Query& q = {}) const;

  /// Replaces the document iff its stored "status" equals `expected_status`.
  bool cas_status(Collection c, std::string_view id, std::string_view expected_status,
                  json new_record);

  /// Replaces the document iff its stored "_rev" equals `expected_revision`.
  bool cas_revision(Collection c, std::string_view id, std::int64_t expected_revision,
                    json new_record);

  /// Unconditional replacement of an existing document.
  void replace(Collection c, json doc);

  void remove(Collection c, std::string_view id);

  /// Id of the document holding `key` in unique index `index`.
  std::optional<std::string> lookup(Collection c, std::string_view index, const json& key) const;

  /// Inserts a document verbatim (keeps "_rev"), for snapshot import.
  void insert_verbatim(Collection c, const json& doc);

  /// Drops index entries whose document is missing or no longer matches.
  std::size_t repair_indexes();

 private:
  class Lock;

  std::filesystem::path doc_path(Collection c, std::string_view id) const;
  std::filesystem::path index_path(Collection c, std::string_view index, const json& key) const;
  void write_atomic(const std::filesystem::path& path, std::string_view content) const;
  std::optional<json> read(const std::filesystem::path& path) const;
  void check_unique(Collection c, const json& doc) const;
  void write_indexes(Collection c, const json& doc, const json* previous);
  void store(Collection c, json doc, const json* previous);

  std::filesystem::path root_;
  bool durable_;
  std::mutex mutex_;
  std::uint32_t process_tag_;
};

}  // namespace sweep
