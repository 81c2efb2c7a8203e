#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sweep {

/// Result file tree:
///   simulators/<sim>/ps/<ps>/runs/<run>/
///   simulators/<sim>/ps/<ps>/analyses/<analysis>/
/// A sealed directory has a sibling "<name>.sealed" holding its tree digest
/// and has its write permission bits cleared.
class FileStore {
 public:
  explicit FileStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  static std::string run_dir(std::string_view simulator_id, std::string_view parameter_set_id,
                             std::string_view run_id);
  static std::string analysis_dir(std::string_view simulator_id,
                                  std::string_view parameter_set_id,
                                  std::string_view analysis_id);

  std::filesystem::path absolute(std::string_view relative) const;

  /// Creates an empty directory. Leftovers from an interrupted, unsealed
  /// attempt are discarded. Throws Error(already_sealed).
  std::filesystem::path reserve(std::string_view relative);

  /// Freezes the directory and returns its tree digest. Throws
  /// Error(already_sealed) on a second call, Error(not_found) when missing.
  std::string seal(std::string_view relative);

  bool is_sealed(std::string_view relative) const;
  std::optional<std::string> sealed_digest(std::string_view relative) const;

  /// Removes a directory and its seal, sealed or not.
  void remove(std::string_view relative);

  /// Relative paths of every sealed directory.
  std::vector<std::string> sealed_dirs() const;

 private:
  std::filesystem::path sentinel(std::string_view relative) const;

  std::filesystem::path root_;
};

/// Recursively clears (writable=false) or restores owner write permission.
void set_tree_writable(const std::filesystem::path& root, bool writable);

}  // namespace sweep
