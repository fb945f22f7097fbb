#pragma once

#include <map>
#include <string>

#include "poiact/engine.hpp"
#include "poiact/feedback_log.hpp"

namespace httplib {
class Server;
}

namespace poiact {

struct ServiceOptions {
  std::string cors_origin = "*";
  std::size_t default_k = 8;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

using QueryParams = std::map<std::string, std::string>;

/// HTTP facade over an Engine and a FeedbackLog. Handlers are plain functions
/// of (request, engine, log) so they can be exercised without a socket;
/// `mount` wires them into a cpp-httplib server.
class Service {
 public:
  Service(const Engine& engine, FeedbackLog& log, ServiceOptions options = {});

  HttpResponse get_grid(const QueryParams& q) const;
  HttpResponse get_predict(const QueryParams& q) const;
  HttpResponse post_feedback(const std::string& body) const;
  HttpResponse get_accuracy(const QueryParams& q) const;

  void mount(httplib::Server& server) const;

 private:
  const Engine& engine_;
  FeedbackLog& log_;
  ServiceOptions options_;
};

}  // namespace poiact
