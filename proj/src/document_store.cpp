#include "sweep/document_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>

#include "sweep/digest.hpp"
#include "sweep/errors.hpp"

namespace sweep {

namespace fs = std::filesystem;

namespace {

struct IndexDef {
  std::string_view name;
  std::vector<std::string_view> fields;
};

const std::vector<IndexDef>& indexes_for(Collection c) {
  static const std::vector<IndexDef> simulators{{"name", {"name"}}};
  static const std::vector<IndexDef> hosts{{"name", {"name"}}};
  static const std::vector<IndexDef> parameter_sets{{"point", {"simulator_id", "canonical_key"}}};
  static const std::vector<IndexDef> runs{{"seed", {"parameter_set_id", "seed"}}};
  static const std::vector<IndexDef> analyzers{{"name", {"simulator_id", "name"}}};
  static const std::vector<IndexDef> none;
  switch (c) {
    case Collection::simulators: return simulators;
    case Collection::hosts: return hosts;
    case Collection::parameter_sets: return parameter_sets;
    case Collection::runs: return runs;
    case Collection::analyzers: return analyzers;
    case Collection::analyses: return none;
  }
  return none;
}

json index_key(const IndexDef& def, const json& doc) {
  json key = json::array();
  for (auto field : def.fields) {
    auto f = std::string(field);
    key.push_back(doc.contains(f) ? doc.at(f) : json(nullptr));
  }
  return key;
}

bool valid_id(std::string_view id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](char c) {
           return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '-' || c == '_';
         });
}

std::atomic<std::uint32_t> g_counter{[] {
  std::random_device rd;
  return static_cast<std::uint32_t>(rd());
}()};

std::atomic<std::uint64_t> g_tmp_counter{0};

}  // namespace

std::string_view to_string(Collection c) {
  switch (c) {
    case Collection::simulators: return "simulators";
    case Collection::parameter_sets: return "parameter_sets";
    case Collection::runs: return "runs";
    case Collection::analyzers: return "analyzers";
    case Collection::analyses: return "analyses";
    case Collection::hosts: return "hosts";
  }
  return "?";
}

Collection parse_collection(std::string_view text) {
  for (auto c : kAllCollections) {
    if (to_string(c) == text) return c;
  }
  throw Error(ErrorCode::validation, "unknown collection '" + std::string(text) + "'");
}

class DocumentStore::Lock {
 public:
  explicit Lock(DocumentStore& store) : guard_(store.mutex_) {
    auto path = store.root_ / ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "open " + path.string());
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        throw std::system_error(errno, std::generic_category(), "flock");
      }
    }
  }
  ~Lock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  Lock(const Lock&) = delete;
  Lock& operator=(const Lock&) = delete;

 private:
  std::lock_guard<std::mutex> guard_;
  int fd_ = -1;
};

DocumentStore::DocumentStore(fs::path root, bool durable)
    : root_(std::move(root)), durable_(durable) {
  fs::create_directories(root_);
  for (auto c : kAllCollections) fs::create_directories(root_ / std::string(to_string(c)));
  std::random_device rd;
  process_tag_ = static_cast<std::uint32_t>(rd());
}

std::string DocumentStore::canonical(const json& doc) { return doc.dump(); }

std::string DocumentStore::new_id() {
  using namespace std::chrono;
  auto secs = duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08x%08x%08x", static_cast<std::uint32_t>(secs), process_tag_,
                g_counter.fetch_add(1));
  return buf;
}

fs::path DocumentStore::doc_path(Collection c, std::string_view id) const {
  if (!valid_id(id)) throw Error(ErrorCode::not_found, "invalid id '" + std::string(id) + "'");
  return root_ / std::string(to_string(c)) / (std::string(id) + ".json");
}

fs::path DocumentStore::index_path(Collection c, std::string_view index, const json& key) const {
  return root_ / std::string(to_string(c)) / "_idx" / std::string(index) /
         sha256_hex(key.dump());
}

void DocumentStore::write_atomic(const fs::path& path, std::string_view content) const {
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(g_tmp_counter.fetch_add(1));
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw std::system_error(errno, std::generic_category(), "open " + tmp.string());
  std::size_t off = 0;
  while (off < content.size()) {
    auto n = ::write(fd, content.data() + off, content.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      int e = errno;
      ::close(fd);
      throw std::system_error(e, std::generic_category(), "write " + tmp.string());
    }
    off += static_cast<std::size_t>(n);
  }
  if (durable_) ::fdatasync(fd);
  ::close(fd);
  fs::rename(tmp, path);
}

std::optional<json> DocumentStore::read(const fs::path& path) const {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
}

void DocumentStore::check_unique(Collection c, const json& doc) const {
  const auto id = doc.at("id").get<std::string>();
  for (const auto& def : indexes_for(c)) {
    auto key = index_key(def, doc);
    auto ipath = index_path(c, def.name, key);
    std::ifstream in(ipath);
    if (!in) continue;
    std::string owner;
    std::getline(in, owner);
    if (owner == id || owner.empty()) continue;
    auto existing = read(doc_path(c, owner));
    if (existing && index_key(def, *existing) == key) {
      throw Error(ErrorCode::duplicate_key, std::string(to_string(c)) + " index '" +
                                                std::string(def.name) + "' already holds " +
                                                key.dump() + " (id " + owner + ")");
    }
  }
}

void DocumentStore::write_indexes(Collection c, const json& doc, const json* previous) {
  const auto id = doc.at("id").get<std::string>();
  for (const auto& def : indexes_for(c)) {
    auto key = index_key(def, doc);
    if (previous) {
      auto old_key = index_key(def, *previous);
      if (old_key == key) continue;
      std::error_code ec;
      fs::remove(index_path(c, def.name, old_key), ec);
    }
    auto ipath = index_path(c, def.name, key);
    fs::create_directories(ipath.parent_path());
    write_atomic(ipath, id);
  }
}

void DocumentStore::store(Collection c, json doc, const json* previous) {
  check_unique(c, doc);
  // Index entries first: a crash in between leaves a dangling entry, which
  // check_unique and repair_indexes treat as free.
  write_indexes(c, doc, previous);
  write_atomic(doc_path(c, doc.at("id").get<std::string>()), canonical(doc));
}

std::string DocumentStore::put(Collection c, json doc) {
  if (!doc.is_object()) throw Error(ErrorCode::validation, "document must be an object");
  if (!doc.contains("id") || !doc["id"].is_string() || doc["id"].get<std::string>().empty()) {
    doc["id"] = new_id();
  }
  const auto id = doc["id"].get<std::string>();
  doc["_rev"] = 1;
  Lock lock(*this);
  auto path = doc_path(c, id);
  if (fs::exists(path)) {
    throw Error(ErrorCode::duplicate_key, std::string(to_string(c)) + " id " + id + " exists");
  }
  store(c, std::move(doc), nullptr);
  return id;
}

void DocumentStore::insert_verbatim(Collection c, const json& doc) {
  const auto id = doc.at("id").get<std::string>();
  Lock lock(*this);
  if (fs::exists(doc_path(c, id))) {
    throw Error(ErrorCode::duplicate_key, std::string(to_string(c)) + " id " + id + " exists");
  }
  store(c, doc, nullptr);
}

json DocumentStore::get(Collection c, std::string_view id) const {
  auto doc = find(c, id);
  if (!doc) {
    throw Error(ErrorCode::not_found,
                std::string(to_string(c)) + " '" + std::string(id) + "' not found");
  }
  return *doc;
}

std::optional<json> DocumentStore::find(Collection c, std::string_view id) const {
  if (!valid_id(id)) return std::nullopt;
  return read(doc_path(c, id));
}

std::vector<json> DocumentStore::query(Collection c, const Query& q) const {
  std::vector<json> docs;
  auto dir = root_ / std::string(to_string(c));
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (p.extension() != ".json") continue;
    auto doc = read(p);
    if (!doc) continue;
    bool match = std::all_of(q.equals.begin(), q.equals.end(), [&](const auto& cond) {
      auto it = doc->find(cond.first);
      return it != doc->end() && *it == cond.second;
    });
    if (match) docs.push_back(std::move(*doc));
  }
  const auto& key = q.sort_by;
  std::stable_sort(docs.begin(), docs.end(), [&](const json& a, const json& b) {
    const json& va = a.contains(key) ? a.at(key) : json(nullptr);
    const json& vb = b.contains(key) ? b.at(key) : json(nullptr);
    if (va != vb) return q.descending ? vb < va : va < vb;
    return a.value("id", std::string()) < b.value("id", std::string());
  });
  if (q.offset >= docs.size()) return {};
  auto first = docs.begin() + static_cast<std::ptrdiff_t>(q.offset);
  auto last = docs.end();
  if (q.limit && *q.limit < static_cast<std::size_t>(last - first)) {
    last = first + static_cast<std::ptrdiff_t>(*q.limit);
  }
  return {std::make_move_iterator(first), std::make_move_iterator(last)};
}

std::size_t DocumentStore::count(Collection c, const Query& q) const {
  Query unpaged = q;
  unpaged.offset = 0;
  unpaged.limit.reset();
  return query(c, unpaged).size();
}

bool DocumentStore::cas_status(Collection c, std::string_view id, std::string_view expected_status,
                               json new_record) {
  Lock lock(*this);
  auto current = read(doc_path(c, id));
  if (!current) {
    throw Error(ErrorCode::not_found,
                std::string(to_string(c)) + " '" + std::string(id) + "' not found");
  }
  if (current->value("status", std::string()) != expected_status) return false;
  new_record["id"] = std::string(id);
  new_record["_rev"] = current->value("_rev", std::int64_t{0}) + 1;
  store(c, std::move(new_record), &*current);
  return true;
}

bool DocumentStore::cas_revision(Collection c, std::string_view id, std::int64_t expected_revision,
                                 json new_record) {
  Lock lock(*this);
  auto current = read(doc_path(c, id));
  if (!current) {
    throw Error(ErrorCode::not_found,
                std::string(to_string(c)) + " '" + std::string(id) + "' not found");
  }
  auto rev = current->value("_rev", std::int64_t{0});
  if (rev != expected_revision) return false;
  new_record["id"] = std::string(id);
  new_record["_rev"] = rev + 1;
  store(c, std::move(new_record), &*current);
  return true;
}

void DocumentStore::replace(Collection c, json doc) {
  const auto id = doc.at("id").get<std::string>();
  Lock lock(*this);
  auto current = read(doc_path(c, id));
  if (!current) {
    throw Error(ErrorCode::not_found, std::string(to_string(c)) + " '" + id + "' not found");
  }
  doc["_rev"] = current->value("_rev", std::int64_t{0}) + 1;
  store(c, std::move(doc), &*current);
}

void DocumentStore::remove(Collection c, std::string_view id) {
  Lock lock(*this);
  auto path = doc_path(c, id);
  auto current = read(path);
  if (!current) {
    throw Error(ErrorCode::not_found,
                std::string(to_string(c)) + " '" + std::string(id) + "' not found");
  }
  fs::remove(path);
  for (const auto& def : indexes_for(c)) {
    std::error_code ec;
    fs::remove(index_path(c, def.name, index_key(def, *current)), ec);
  }
}

std::optional<std::string> DocumentStore::lookup(Collection c, std::string_view index,
                                                 const json& key) const {
  for (const auto& def : indexes_for(c)) {
    if (def.name != index) continue;
    std::ifstream in(index_path(c, def.name, key));
    if (!in) return std::nullopt;
    std::string owner;
    std::getline(in, owner);
    auto doc = find(c, owner);
    if (doc && index_key(def, *doc) == key) return owner;
    return std::nullopt;
  }
  throw Error(ErrorCode::validation, "unknown index '" + std::string(index) + "'");
}

std::size_t DocumentStore::repair_indexes() {
  Lock lock(*this);
  std::size_t removed = 0;
  for (auto c : kAllCollections) {
    for (const auto& def : indexes_for(c)) {
      auto dir = root_ / std::string(to_string(c)) / "_idx" / std::string(def.name);
      if (!fs::exists(dir)) continue;
      for (const auto& entry : fs::directory_iterator(dir)) {
        std::ifstream in(entry.path());
        std::string owner;
        std::getline(in, owner);
        in.close();
        auto doc = valid_id(owner) ? read(doc_path(c, owner)) : std::nullopt;
        if (!doc || sha256_hex(index_key(def, *doc).dump()) != entry.path().filename().string()) {
          fs::remove(entry.path());
          ++removed;
        }
      }
    }
  }
  return removed;
}

}  // namespace sweep
