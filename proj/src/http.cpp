#include "sweep/http.hpp"

#include <httplib.h>

#include "sweep/errors.hpp"

namespace sweep {

ApiResponse HttpClient::call(const ApiRequest& request) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(5);
  client.set_read_timeout(300);
  httplib::Params params(request.query.begin(), request.query.end());
  const std::string path = httplib::append_query_params(request.path, params);
  httplib::Result res;
  const char* type = "application/json";
  if (request.method == "GET") {
    res = client.Get(path);
  } else if (request.method == "POST") {
    res = client.Post(path, request.body, type);
  } else if (request.method == "PUT") {
    res = client.Put(path, request.body, type);
  } else if (request.method == "PATCH") {
    res = client.Patch(path, request.body, type);
  } else if (request.method == "DELETE") {
    res = client.Delete(path, request.body, type);
  } else {
    throw Error(ErrorCode::validation, "unsupported method " + request.method);
  }
  if (!res) {
    throw Error(ErrorCode::transport_failure,
                "cannot reach " + base_url_ + ": " + httplib::to_string(res.error()));
  }
  ApiResponse out;
  out.status = res->status;
  out.body = res->body;
  out.content_type = res->get_header_value("Content-Type");
  return out;
}

HttpServer::HttpServer(Api& api, std::string bind_address, int port)
    : api_(api), address_(std::move(bind_address)), port_(port),
      server_(std::make_unique<httplib::Server>()) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    r.body = req.body;
    auto out = api_.handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  const char* any = R"(.*)";
  server_->Get(any, handler);
  server_->Post(any, handler);
  server_->Put(any, handler);
  server_->Patch(any, handler);
  server_->Delete(any, handler);
  server_->Options(any, handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (port_ == 0) {
    port_ = server_->bind_to_any_port(address_);
    return port_ > 0 ? port_ : -1;
  }
  return server_->bind_to_port(address_, port_) ? port_ : -1;
}

bool HttpServer::listen() { return server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace sweep
