#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "sweep/model.hpp"
#include "sweep/process.hpp"

namespace sweep {

/// Every effect on a computational host goes through this interface.
/// Paths are host paths; a leading "~/" means the login user's home.
/// Implementations throw Error(transport_failure) when the host cannot be
/// reached or an operation fails for infrastructure reasons.
class Transport {
 public:
  virtual ~Transport() = default;

  /// Runs a shell command on the host. A non-zero exit of the command
  /// itself is reported in the result, not thrown.
  virtual ProcessResult exec(const std::string& command) = 0;

  virtual void make_dirs(const std::string& path) = 0;
  virtual void write_file(const std::string& path, std::string_view content,
                          bool executable = false) = 0;
  virtual std::optional<std::string> read_file(const std::string& path) = 0;
  virtual bool exists(const std::string& path) = 0;
  virtual void remove_all(const std::string& path) = 0;

  /// Copies a local directory tree to `remote` (created if missing).
  virtual void upload_tree(const std::filesystem::path& local, const std::string& remote) = 0;

  /// Copies one host file to a local path; false when the host file is absent.
  virtual bool download(const std::string& remote, const std::filesystem::path& local) = 0;
};

/// Executes on this machine.
class LocalTransport : public Transport {
 public:
  ProcessResult exec(const std::string& command) override;
  void make_dirs(const std::string& path) override;
  void write_file(const std::string& path, std::string_view content, bool executable) override;
  std::optional<std::string> read_file(const std::string& path) override;
  bool exists(const std::string& path) override;
  void remove_all(const std::string& path) override;
  void upload_tree(const std::filesystem::path& local, const std::string& remote) override;
  bool download(const std::string& remote, const std::filesystem::path& local) override;

  static std::filesystem::path expand(const std::string& path);
};

/// Key-based OpenSSH (BatchMode, never prompts for a password).
class SshTransport : public Transport {
 public:
  explicit SshTransport(Host host) : host_(std::move(host)) {}

  ProcessResult exec(const std::string& command) override;
  void make_dirs(const std::string& path) override;
  void write_file(const std::string& path, std::string_view content, bool executable) override;
  std::optional<std::string> read_file(const std::string& path) override;
  bool exists(const std::string& path) override;
  void remove_all(const std::string& path) override;
  void upload_tree(const std::filesystem::path& local, const std::string& remote) override;
  bool download(const std::string& remote, const std::filesystem::path& local) override;

  /// argv prefix "ssh -o BatchMode=yes -p <port> [user@]address".
  std::vector<std::string> ssh_argv() const;
  /// Host path as seen by the login shell ("~/x" becomes "x").
  static std::string remote_path(const std::string& path);

 private:
  ProcessResult ssh(const std::string& command, std::string input = {});

  Host host_;
};

std::unique_ptr<Transport> make_transport(const Host& host);

/// Joins host path components with '/'.
std::string host_path(std::string_view base, std::string_view name);

}  // namespace sweep
