#include "sweep/transport.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sweep/errors.hpp"
#include "sweep/file_store.hpp"

namespace sweep {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void transport_error(const std::string& what, const std::string& detail = {}) {
  throw Error(ErrorCode::transport_failure, detail.empty() ? what : what + ": " + detail);
}

}  // namespace

std::string host_path(std::string_view base, std::string_view name) {
  std::string out(base);
  while (out.size() > 1 && out.back() == '/') out.pop_back();
  out += '/';
  out += name;
  return out;
}

fs::path LocalTransport::expand(const std::string& path) {
  if (path == "~" || path.rfind("~/", 0) == 0) {
    const char* home = std::getenv("HOME");
    return fs::path(home ? home : "/") / path.substr(path.size() > 1 ? 2 : 1);
  }
  return path;
}

ProcessResult LocalTransport::exec(const std::string& command) {
  try {
    return run_shell(command);
  } catch (const std::exception& e) {
    transport_error("local exec failed", e.what());
  }
}

void LocalTransport::make_dirs(const std::string& path) {
  std::error_code ec;
  fs::create_directories(expand(path), ec);
  if (ec) transport_error("mkdir " + path, ec.message());
}

void LocalTransport::write_file(const std::string& path, std::string_view content, bool executable) {
  auto p = expand(path);
  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) transport_error("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) transport_error("cannot write " + path);
  }
  if (executable) {
    std::error_code ec;
    fs::permissions(p, fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                    fs::perm_options::add, ec);
  }
}

std::optional<std::string> LocalTransport::read_file(const std::string& path) {
  std::ifstream in(expand(path), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool LocalTransport::exists(const std::string& path) {
  std::error_code ec;
  return fs::exists(expand(path), ec);
}

void LocalTransport::remove_all(const std::string& path) {
  auto p = expand(path);
  std::error_code ec;
  set_tree_writable(p, true);
  fs::remove_all(p, ec);
  if (ec) transport_error("rm " + path, ec.message());
}

void LocalTransport::upload_tree(const fs::path& local, const std::string& remote) {
  auto dst = expand(remote);
  std::error_code ec;
  fs::create_directories(dst, ec);
  fs::copy(local, dst, fs::copy_options::recursive | fs::copy_options::copy_symlinks, ec);
  if (ec) transport_error("copy " + local.string() + " -> " + remote, ec.message());
  set_tree_writable(dst, true);
}

bool LocalTransport::download(const std::string& remote, const fs::path& local) {
  auto src = expand(remote);
  if (!fs::exists(src)) return false;
  std::error_code ec;
  fs::copy_file(src, local, fs::copy_options::overwrite_existing, ec);
  if (ec) transport_error("copy " + remote, ec.message());
  return true;
}

std::vector<std::string> SshTransport::ssh_argv() const {
  std::vector<std::string> argv{"ssh", "-o", "BatchMode=yes", "-p", std::to_string(host_.port)};
  argv.push_back(host_.user.empty() ? host_.address : host_.user + "@" + host_.address);
  return argv;
}

std::string SshTransport::remote_path(const std::string& path) {
  if (path == "~") return ".";
  if (path.rfind("~/", 0) == 0) return path.substr(2);
  return path;
}

ProcessResult SshTransport::ssh(const std::string& command, std::string input) {
  auto argv = ssh_argv();
  argv.push_back(command);
  ProcessResult r;
  try {
    r = run_process(argv, ProcessOptions{{}, std::move(input)});
  } catch (const std::exception& e) {
    transport_error("ssh to " + host_.address, e.what());
  }
  // OpenSSH reserves 255 for its own connection errors.
  if (r.exit_code == 255) transport_error("ssh to " + host_.address, r.err);
  return r;
}

ProcessResult SshTransport::exec(const std::string& command) { return ssh(command); }

void SshTransport::make_dirs(const std::string& path) {
  auto r = ssh("mkdir -p " + shell_quote(remote_path(path)));
  if (!r.ok()) transport_error("mkdir " + path, r.err);
}

void SshTransport::write_file(const std::string& path, std::string_view content, bool executable) {
  auto p = shell_quote(remote_path(path));
  std::string cmd = "cat > " + p;
  if (executable) cmd += " && chmod +x " + p;
  auto r = ssh(cmd, std::string(content));
  if (!r.ok()) transport_error("write " + path, r.err);
}

std::optional<std::string> SshTransport::read_file(const std::string& path) {
  auto p = shell_quote(remote_path(path));
  auto r = ssh("test -f " + p + " && cat " + p);
  if (!r.ok()) return std::nullopt;
  return r.out;
}

bool SshTransport::exists(const std::string& path) {
  return ssh("test -e " + shell_quote(remote_path(path))).ok();
}

void SshTransport::remove_all(const std::string& path) {
  auto p = shell_quote(remote_path(path));
  auto r = ssh("chmod -R u+w " + p + " 2>/dev/null; rm -rf " + p);
  if (!r.ok()) transport_error("rm " + path, r.err);
}

void SshTransport::upload_tree(const fs::path& local, const std::string& remote) {
  std::string ssh_cmd;
  for (const auto& a : ssh_argv()) ssh_cmd += shell_quote(a) + " ";
  auto dst = shell_quote(remote_path(remote));
  auto cmd = "tar -C " + shell_quote(local.string()) + " -cf - . | " + ssh_cmd +
             shell_quote("mkdir -p " + dst + " && tar -C " + dst + " -xf - && chmod -R u+w " + dst);
  auto r = run_shell(cmd);
  if (!r.ok()) transport_error("upload " + local.string(), r.err);
}

bool SshTransport::download(const std::string& remote, const fs::path& local) {
  if (!exists(remote)) return false;
  auto r = ssh("cat " + shell_quote(remote_path(remote)));
  if (!r.ok()) transport_error("download " + remote, r.err);
  std::ofstream out(local, std::ios::binary | std::ios::trunc);
  out.write(r.out.data(), static_cast<std::streamsize>(r.out.size()));
  if (!out) transport_error("cannot write " + local.string());
  return true;
}

std::unique_ptr<Transport> make_transport(const Host& host) {
  if (host.transport == TransportKind::ssh) return std::make_unique<SshTransport>(host);
  return std::make_unique<LocalTransport>();
}

}  // namespace sweep
