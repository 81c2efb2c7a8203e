#pragma once

#include <map>
#include <string>
#include <vector>

#include "sweep/catalog.hpp"
#include "sweep/errors.hpp"

namespace sweep {

enum class ServiceMode { read_write, read_only };

std::string_view to_string(ServiceMode mode);

struct ApiRequest {
  std::string method = "GET";
  /// Decoded path, e.g. "/runs/abc/files/out.csv".
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  json json_body() const { return json::parse(body); }
};

struct Route {
  std::string method;
  /// Segments in braces are parameters; "{path*}" swallows the rest.
  std::string pattern;
  std::string summary;
  bool mutating = false;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);

/// The operation layer behind both the HTTP server and the CLI. Handlers are
/// stateless; every write goes through the catalog.
class Api {
 public:
  Api(Catalog& catalog, ServiceMode mode) : catalog_(catalog), mode_(mode) {}

  ServiceMode mode() const { return mode_; }
  ApiResponse handle(const ApiRequest& request);

  static const std::vector<Route>& routes();
  /// OpenAPI-style description; "x-mode" carries the service mode.
  json spec() const;

 private:
  Catalog& catalog_;
  ServiceMode mode_;
};

}  // namespace sweep
