#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace sweep {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// SHA-256 over the byte-sorted list of regular files and symlinks below
/// `root`, each contributing "<relative/path>\0<hex sha256 of content>\n".
/// Symlinks hash their target string. Directories contribute nothing.
/// Top-level entries named in `skip` are left out.
std::string tree_digest(const std::filesystem::path& root,
                        std::span<const std::string_view> skip = {});

/// Digest recorded for a result directory: the tree digest without the
/// executor-written _status.json, _time.txt and _version.txt.
std::string content_digest(const std::filesystem::path& root);

}  // namespace sweep
