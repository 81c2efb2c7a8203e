#include "sweep/snapshot.hpp"

#include <unistd.h>

#include <fstream>
#include <sstream>

#include "sweep/digest.hpp"
#include "sweep/errors.hpp"
#include "sweep/process.hpp"

namespace sweep {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "sweepd-snapshot";
constexpr int kVersion = 1;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const fs::path& parent, std::string_view tag) {
    fs::create_directories(parent);
    std::string templ = (parent / ("." + std::string(tag) + "-XXXXXX")).string();
    if (!::mkdtemp(templ.data())) throw Error(ErrorCode::validation, "mkdtemp failed in " + parent.string());
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    set_tree_writable(path_, true);
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::optional<std::string> result_dir_of(const json& doc) {
  auto it = doc.find("result_dir");
  if (it == doc.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

std::optional<std::string> result_digest_of(const json& doc) {
  auto it = doc.find("result_digest");
  if (it == doc.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

bool safe_relative(const std::string& rel) {
  fs::path p(rel);
  if (rel.empty() || p.is_absolute()) return false;
  for (const auto& part : p) {
    if (part == "..") return false;
  }
  return true;
}

}  // namespace

json ExportReport::to_json() const { return {{"documents", documents}, {"result_dirs", result_dirs}}; }

json ImportReport::to_json() const {
  return {{"inserted", inserted}, {"skipped", skipped}, {"result_dirs", result_dirs}};
}

ExportReport export_snapshot(const Catalog& catalog, const fs::path& archive) {
  ExportReport report;
  std::vector<std::string> members;
  std::vector<std::string> dirs;
  json manifest = {{"format", kFormat}, {"version", kVersion}, {"documents", json::object()}};
  const auto db_root = catalog.documents().root();
  for (auto c : kAllCollections) {
    const std::string name(to_string(c));
    Query by_id;
    by_id.sort_by = "id";
    auto docs = catalog.documents().query(c, by_id);
    report.documents[name] = docs.size();
    manifest["documents"][name] = docs.size();
    for (const auto& doc : docs) {
      const auto id = doc.at("id").get<std::string>();
      members.push_back("db/" + name + "/" + id + ".json");
      if (auto rel = result_dir_of(doc); rel && result_digest_of(doc)) {
        if (!catalog.files().is_sealed(*rel)) continue;
        dirs.push_back("files/" + *rel);
        ++report.result_dirs;
      }
    }
  }

  TempDir tmp(archive.has_parent_path() ? fs::absolute(archive).parent_path()
                                        : fs::current_path(),
              "export");
  {
    std::ofstream out(tmp.path() / "manifest.json");
    out << manifest.dump(2) << "\n";
    std::ofstream list(tmp.path() / "members");
    for (const auto& m : members) list << m << "\n";
  }
  auto db_parent = db_root.parent_path();
  auto files_parent = catalog.files().root().parent_path();
  if (fs::weakly_canonical(db_parent) != fs::weakly_canonical(files_parent)) {
    throw Error(ErrorCode::validation, "documents and files must share a data root to export");
  }
  const auto out_tmp = fs::absolute(archive).string() + ".tmp";
  auto r = run_process({"tar", "-cf", out_tmp, "-C", tmp.path().string(), "manifest.json", "-C",
                        db_parent.string(), "--no-recursion", "-T",
                        (tmp.path() / "members").string()});
  if (!r.ok()) {
    std::error_code ec;
    fs::remove(out_tmp, ec);
    throw Error(ErrorCode::validation, "tar failed: " + r.err);
  }
  if (!dirs.empty()) {
    std::ofstream list(tmp.path() / "dirs");
    for (const auto& d : dirs) list << d << "\n";
    list.close();
    auto r2 = run_process({"tar", "-rf", out_tmp, "-C", db_parent.string(), "-T",
                           (tmp.path() / "dirs").string()});
    if (!r2.ok()) {
      std::error_code ec;
      fs::remove(out_tmp, ec);
      throw Error(ErrorCode::validation, "tar failed: " + r2.err);
    }
  }
  fs::rename(out_tmp, archive);
  return report;
}

ImportReport import_snapshot(Catalog& catalog, const fs::path& archive) {
  if (!fs::is_regular_file(archive)) {
    throw Error(ErrorCode::corrupt_snapshot, "snapshot not found: " + archive.string());
  }
  TempDir tmp(catalog.data_root(), "import");
  auto r = run_process({"tar", "-xf", fs::absolute(archive).string(), "-C", tmp.path().string(),
                        "--no-same-owner"});
  if (!r.ok()) throw Error(ErrorCode::corrupt_snapshot, "cannot unpack snapshot: " + r.err);

  json manifest;
  try {
    manifest = json::parse(slurp(tmp.path() / "manifest.json"));
  } catch (const std::exception&) {
    throw Error(ErrorCode::corrupt_snapshot, "manifest.json missing or malformed");
  }
  if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion) {
    throw Error(ErrorCode::corrupt_snapshot, "unsupported snapshot format");
  }

  struct Pending {
    Collection collection;
    json doc;
    std::string text;
  };
  std::vector<Pending> pending;
  ImportReport report;
  std::vector<std::string> conflicts;

  // Validate everything before touching the store.
  for (auto c : kAllCollections) {
    const std::string name(to_string(c));
    const auto dir = tmp.path() / "db" / name;
    std::size_t seen = 0;
    if (fs::is_directory(dir)) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        ++seen;
        auto text = slurp(entry.path());
        json doc = json::parse(text, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("id") ||
            !doc["id"].is_string() || doc["id"].get<std::string>() != entry.path().stem().string()) {
          throw Error(ErrorCode::corrupt_snapshot, "malformed document " + entry.path().filename().string());
        }
        const auto id = doc["id"].get<std::string>();
        if (auto existing = catalog.documents().find(c, id)) {
          if (DocumentStore::canonical(*existing) == DocumentStore::canonical(doc)) {
            ++report.skipped;
            continue;
          }
          conflicts.push_back(name + "/" + id + ": differs from the stored document");
          continue;
        }
        if (auto rel = result_dir_of(doc)) {
          auto digest = result_digest_of(doc);
          if (!safe_relative(*rel)) {
            throw Error(ErrorCode::corrupt_snapshot, name + "/" + id + ": bad result_dir");
          }
          if (digest) {
            const auto src = tmp.path() / "files" / *rel;
            if (!fs::is_directory(src)) {
              conflicts.push_back(name + "/" + id + ": result directory missing");
            } else if (content_digest(src) != *digest) {
              conflicts.push_back(name + "/" + id + ": result digest mismatch");
            } else if (catalog.files().is_sealed(*rel) &&
                       catalog.files().sealed_digest(*rel) != digest) {
              conflicts.push_back(name + "/" + id + ": stored result directory differs");
            }
          }
        }
        pending.push_back({c, std::move(doc), std::move(text)});
      }
    }
    if (manifest.contains("documents") && manifest["documents"].value(name, seen) != seen) {
      throw Error(ErrorCode::corrupt_snapshot, "document count mismatch for " + name);
    }
  }
  if (!conflicts.empty()) {
    std::string msg = std::to_string(conflicts.size()) + " conflict(s): ";
    for (std::size_t i = 0; i < conflicts.size(); ++i) msg += (i ? "; " : "") + conflicts[i];
    throw Error(ErrorCode::digest_conflict, msg);
  }

  // Apply, undoing everything on the first failure.
  std::vector<std::pair<Collection, std::string>> inserted;
  std::vector<std::string> sealed;
  try {
    for (const auto& p : pending) {
      auto rel = result_dir_of(p.doc);
      auto digest = result_digest_of(p.doc);
      if (rel && digest && !catalog.files().is_sealed(*rel)) {
        auto dest = catalog.files().reserve(*rel);
        fs::remove(dest);
        fs::copy(tmp.path() / "files" / *rel, dest, fs::copy_options::recursive);
        sealed.push_back(*rel);
        if (catalog.files().seal(*rel) != *digest) {
          throw Error(ErrorCode::digest_conflict, *rel + ": digest changed while importing");
        }
        ++report.result_dirs;
      }
    }
    for (const auto& p : pending) {
      catalog.documents().insert_verbatim(p.collection, p.doc);
      inserted.emplace_back(p.collection, p.doc["id"].get<std::string>());
      ++report.inserted[std::string(to_string(p.collection))];
    }
  } catch (...) {
    for (const auto& [c, id] : inserted) {
      try {
        catalog.documents().remove(c, id);
      } catch (const std::exception&) {
      }
    }
    for (const auto& rel : sealed) {
      try {
        catalog.files().remove(rel);
      } catch (const std::exception&) {
      }
    }
    throw;
  }
  return report;
}

}  // namespace sweep
