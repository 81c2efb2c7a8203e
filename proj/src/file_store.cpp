#include "sweep/file_store.hpp"

#include <algorithm>
#include <fstream>

#include "sweep/digest.hpp"
#include "sweep/errors.hpp"

namespace sweep {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSealSuffix = ".sealed";

}  // namespace

void set_tree_writable(const fs::path& root, bool writable) {
  if (!fs::exists(root)) return;
  constexpr auto write_bits = fs::perms::owner_write | fs::perms::group_write | fs::perms::others_write;
  auto apply = [&](const fs::path& p) {
    std::error_code ec;
    if (writable) {
      fs::permissions(p, fs::perms::owner_write, fs::perm_options::add | fs::perm_options::nofollow, ec);
    } else {
      fs::permissions(p, write_bits, fs::perm_options::remove | fs::perm_options::nofollow, ec);
    }
  };
  if (writable) apply(root);
  if (fs::is_directory(root)) {
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
      if (it->is_symlink()) continue;
      if (writable || !it->is_directory()) apply(it->path());
    }
    if (!writable) {
      // Directories last so the walk above could still descend.
      for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_directory() && !it->is_symlink()) apply(it->path());
      }
    }
  }
  if (!writable) apply(root);
}

FileStore::FileStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

std::string FileStore::run_dir(std::string_view simulator_id, std::string_view parameter_set_id,
                               std::string_view run_id) {
  return "simulators/" + std::string(simulator_id) + "/ps/" + std::string(parameter_set_id) +
         "/runs/" + std::string(run_id);
}

std::string FileStore::analysis_dir(std::string_view simulator_id,
                                    std::string_view parameter_set_id,
                                    std::string_view analysis_id) {
  return "simulators/" + std::string(simulator_id) + "/ps/" + std::string(parameter_set_id) +
         "/analyses/" + std::string(analysis_id);
}

fs::path FileStore::absolute(std::string_view relative) const {
  fs::path rel(relative);
  if (rel.is_absolute() || relative.find("..") != std::string_view::npos) {
    throw Error(ErrorCode::validation, "result path must be relative: " + std::string(relative));
  }
  return root_ / rel;
}

fs::path FileStore::sentinel(std::string_view relative) const {
  auto p = absolute(relative);
  p += std::string(kSealSuffix);
  return p;
}

fs::path FileStore::reserve(std::string_view relative) {
  if (is_sealed(relative)) {
    throw Error(ErrorCode::already_sealed, std::string(relative) + " is sealed");
  }
  auto dir = absolute(relative);
  if (fs::exists(dir)) {
    set_tree_writable(dir, true);
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return dir;
}

std::string FileStore::seal(std::string_view relative) {
  if (is_sealed(relative)) {
    throw Error(ErrorCode::already_sealed, std::string(relative) + " is already sealed");
  }
  auto dir = absolute(relative);
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::not_found, std::string(relative) + " has not been reserved");
  }
  auto digest = content_digest(dir);
  set_tree_writable(dir, false);
  auto marker = sentinel(relative);
  auto tmp = marker;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << digest << '\n';
  }
  fs::rename(tmp, marker);
  return digest;
}

bool FileStore::is_sealed(std::string_view relative) const { return fs::exists(sentinel(relative)); }

std::optional<std::string> FileStore::sealed_digest(std::string_view relative) const {
  std::ifstream in(sentinel(relative));
  if (!in) return std::nullopt;
  std::string digest;
  std::getline(in, digest);
  return digest;
}

void FileStore::remove(std::string_view relative) {
  auto dir = absolute(relative);
  std::error_code ec;
  fs::remove(sentinel(relative), ec);
  if (fs::exists(dir)) {
    set_tree_writable(dir, true);
    fs::remove_all(dir);
  }
}

std::vector<std::string> FileStore::sealed_dirs() const {
  std::vector<std::string> out;
  if (!fs::exists(root_)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(root_)) {
    if (!entry.is_regular_file()) continue;
    auto name = entry.path().filename().string();
    if (name.size() <= kSealSuffix.size() ||
        name.compare(name.size() - kSealSuffix.size(), kSealSuffix.size(), kSealSuffix) != 0) {
      continue;
    }
    auto rel_path = entry.path().lexically_relative(root_);
    auto parent = rel_path.parent_path().filename();
    if (std::distance(rel_path.begin(), rel_path.end()) != 6 ||
        (parent != "runs" && parent != "analyses")) {
      continue;
    }
    auto rel = rel_path.generic_string();
    out.push_back(rel.substr(0, rel.size() - kSealSuffix.size()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace sweep
