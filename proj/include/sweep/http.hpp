#pragma once

#include <memory>
#include <string>

#include "sweep/api.hpp"

namespace httplib {
class Server;
}

namespace sweep {

/// How the CLI reaches the operation layer: in-process or over HTTP.
class ApiClient {
 public:
  virtual ~ApiClient() = default;
  /// Throws Error(transport_failure) when the service cannot be reached.
  virtual ApiResponse call(const ApiRequest& request) = 0;
};

class LocalClient : public ApiClient {
 public:
  explicit LocalClient(Api& api) : api_(api) {}
  ApiResponse call(const ApiRequest& request) override { return api_.handle(request); }

 private:
  Api& api_;
};

class HttpClient : public ApiClient {
 public:
  /// `base_url` such as "http://127.0.0.1:3000".
  explicit HttpClient(std::string base_url) : base_url_(std::move(base_url)) {}
  ApiResponse call(const ApiRequest& request) override;

 private:
  std::string base_url_;
};

/// Serves an Api over HTTP/1.1.
class HttpServer {
 public:
  HttpServer(Api& api, std::string bind_address = "127.0.0.1", int port = 3000);
  ~HttpServer();

  /// Binds (port 0 picks a free one); returns the bound port or -1.
  int bind();
  /// Blocks until stop().
  bool listen();
  void stop();

 private:
  Api& api_;
  std::string address_;
  int port_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace sweep
