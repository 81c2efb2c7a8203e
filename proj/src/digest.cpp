#include "sweep/digest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>
#include <vector>

#include "sweep/errors.hpp"

namespace sweep {

namespace fs = std::filesystem;

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256 init failed");
    }
  }

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
      out += kHex[md[i] >> 4];
      out += kHex[md[i] & 0xf];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string tree_digest(const fs::path& root, std::span<const std::string_view> skip) {
  std::vector<std::pair<std::string, std::string>> entries;
  if (fs::exists(root)) {
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator();
         ++it) {
      const auto& entry = *it;
      auto rel = entry.path().lexically_relative(root).generic_string();
      if (it.depth() == 0 && std::find(skip.begin(), skip.end(), rel) != skip.end()) continue;
      if (entry.is_symlink()) {
        entries.emplace_back(rel, sha256_hex(fs::read_symlink(entry.path()).string()));
        it.disable_recursion_pending();
      } else if (entry.is_regular_file()) {
        entries.emplace_back(rel, sha256_file(entry.path()));
      }
    }
  }
  std::sort(entries.begin(), entries.end());
  Sha256 h;
  for (const auto& [path, hash] : entries) {
    h.update(path.data(), path.size());
    h.update("\0", 1);
    h.update(hash.data(), hash.size());
    h.update("\n", 1);
  }
  return h.hex();
}

std::string content_digest(const fs::path& root) {
  static constexpr std::string_view kExecutorFiles[] = {"_status.json", "_time.txt",
                                                         "_version.txt"};
  return tree_digest(root, kExecutorFiles);
}

}  // namespace sweep
