#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sweep/catalog.hpp"

namespace sweep {

struct ExportReport {
  std::map<std::string, std::size_t> documents;  // per collection
  std::size_t result_dirs = 0;
  json to_json() const;
};

struct ImportReport {
  std::map<std::string, std::size_t> inserted;  // per collection
  std::size_t skipped = 0;
  std::size_t result_dirs = 0;
  json to_json() const;
};

/// Writes a tar archive holding manifest.json, every document verbatim under
/// db/ and every result directory referenced by a document under files/.
ExportReport export_snapshot(const Catalog& catalog, const std::filesystem::path& archive);

/// Merges a snapshot into the catalog, all or nothing. Documents whose id
/// already exists are skipped when byte-identical and rejected otherwise;
/// every imported result directory must match its recorded digest.
/// Throws Error(corrupt_snapshot) or Error(digest_conflict).
ImportReport import_snapshot(Catalog& catalog, const std::filesystem::path& archive);

}  // namespace sweep
