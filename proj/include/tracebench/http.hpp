// JSON over HTTP front end for Service.
#pragma once

#include <memory>
#include <string>

#include "tracebench/service.hpp"

namespace tracebench {

class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  // Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// "host:port", ":port" or "port".
std::pair<std::string, int> parse_bind_address(const std::string& s);

}  // namespace tracebench
