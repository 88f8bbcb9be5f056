#include "tracebench/http.hpp"

#include <httplib.h>

#include <charconv>

#include "tracebench/plotspec.hpp"
#include "tracebench/validation.hpp"

namespace tracebench {

namespace {

using Json = nlohmann::json;

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const std::exception& e) {
  const ErrorInfo info = classify_error(e);
  send(res, info.status, error_json(info));
}

Json body_of(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json j = Json::parse(req.body);
  if (!j.is_object()) throw BadRequest("request body must be a JSON object");
  return j;
}

std::string required(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) throw BadRequest(std::string("missing string field '") + key + "'");
  return j.at(key).get<std::string>();
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw BadRequest(std::string("bad integer for '") + key + "'");
  return out;
}

std::vector<std::string> string_args(const Json& j) {
  std::vector<std::string> args;
  if (!j.contains("args")) return args;
  if (!j.at("args").is_array()) throw BadRequest("'args' must be an array");
  for (const auto& a : j.at("args")) {
    // Parameters are strings; numbers are accepted and formatted.
    args.push_back(a.is_string() ? a.get<std::string>() : a.dump());
  }
  return args;
}

TimeSeries series_from_json(const Json& j) {
  if (j.is_string()) return read_series_csv(j.get<std::string>());
  TimeSeries s;
  s.t = j.at("t").get<std::vector<double>>();
  s.v = j.at("v").get<std::vector<double>>();
  if (s.t.size() != s.v.size()) throw BadRequest("series t and v differ in length");
  s.dt = j.contains("dt") ? j.at("dt").get<double>() : (s.t.size() >= 2 ? s.t[1] - s.t[0] : 300.0);
  return s;
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const std::exception& e) {
      send_error(res, e);
    }
  };
}

void routes(httplib::Server& srv, Service& svc) {
  srv.Get("/health", guarded([](const auto&, auto& res) { send(res, 200, {{"schema", kApiSchema}, {"ok", true}}); }));

  srv.Get("/storages", guarded([&svc](const auto&, auto& res) { send(res, 200, svc.list_storages()); }));
  srv.Post("/storages", guarded([&svc](const auto& req, auto& res) {
             const Json b = body_of(req);
             send(res, 201, svc.create_storage(required(b, "id"), b.value("backend", std::string("partitioned"))));
           }));
  srv.Get(R"(/storages/([^/]+))",
          guarded([&svc](const auto& req, auto& res) { send(res, 200, svc.describe_storage(req.matches[1])); }));
  srv.Get(R"(/storages/([^/]+)/tables)",
          guarded([&svc](const auto& req, auto& res) { send(res, 200, svc.list_tables(req.matches[1])); }));
  srv.Get(R"(/storages/([^/]+)/tables/([^/]+)/rows)", guarded([&svc](const auto& req, auto& res) {
            send(res, 200,
                 svc.table_rows(req.matches[1], req.matches[2], query_size(req, "offset", 0),
                                query_size(req, "limit", 100)));
          }));
  srv.Post(R"(/storages/([^/]+)/import)", guarded([&svc](const auto& req, auto& res) {
             const Json b = body_of(req);
             send(res, 201, svc.import_csv(req.matches[1], required(b, "file"), required(b, "table"),
                                           b.value("header", false)));
           }));
  srv.Post(R"(/storages/([^/]+)/export)", guarded([&svc](const auto& req, auto& res) {
             const Json b = body_of(req);
             send(res, 200, svc.export_csv(req.matches[1], required(b, "table"), required(b, "file")));
           }));
  srv.Post("/transfer", guarded([&svc](const auto& req, auto& res) {
             const Json b = body_of(req);
             send(res, 201, svc.transfer(required(b, "from"), required(b, "table"), required(b, "to")));
           }));

  srv.Post("/query", guarded([&svc](const auto& req, auto& res) {
             const Json b = body_of(req);
             std::optional<unsigned> workers;
             if (b.contains("workers")) workers = b.at("workers").get<unsigned>();
             const bool explain = b.value("explain", false);
             send(res, explain ? 200 : 201,
                  svc.query(required(b, "storage"), required(b, "sql"), b.value("dest", std::string()), workers,
                            explain));
           }));

  srv.Get("/commands", guarded([&svc](const auto&, auto& res) { send(res, 200, svc.list_commands()); }));
  srv.Post("/commands/reload", guarded([&svc](const auto&, auto& res) { send(res, 200, svc.reload_commands()); }));
  srv.Post("/commands/run", guarded([&svc](const auto& req, auto& res) {
             const Json b = body_of(req);
             const std::string storage = required(b, "storage"), table = required(b, "table");
             const auto output = optional_string(b, "output");
             if (b.contains("command")) {
               send(res, 200, svc.run_command(storage, table, required(b, "command"), string_args(b),
                                              optional_string(b, "script_override"), output));
             } else {
               send(res, 200, svc.run_script(storage, table, required(b, "script"), output));
             }
           }));
  srv.Post("/fit", guarded([&svc](const auto& req, auto& res) {
             const Json b = body_of(req);
             send(res, 200, svc.fit(required(b, "storage"), required(b, "table"), b.at("column").get<std::size_t>(),
                                    required(b, "family"), b.value("intervals", std::size_t{20})));
           }));

  srv.Get(R"(/plots/([^/]+))", guarded([&svc](const auto& req, auto& res) {
            const auto p = svc.plot(req.matches[1]);
            if (!p) throw NotFoundError("no plot '" + std::string(req.matches[1]) + "'");
            if (req.get_param_value("format") == "svg") {
              res.set_content(render_svg(*p), "image/svg+xml");
              return;
            }
            send(res, 200, {{"schema", kApiSchema}, {"id", req.matches[1]}, {"plot", to_json(*p)}});
          }));

  srv.Post("/simulations", guarded([&svc](const auto& req, auto& res) {
             const std::string id = svc.submit_simulation(sim_config_from_json(body_of(req)));
             send(res, 202, svc.simulation_status(id));
           }));
  srv.Get(R"(/simulations/([^/]+))",
          guarded([&svc](const auto& req, auto& res) { send(res, 200, svc.simulation_status(req.matches[1])); }));
  srv.Post(R"(/simulations/([^/]+)/cancel)",
           guarded([&svc](const auto& req, auto& res) { send(res, 200, svc.cancel_simulation(req.matches[1])); }));
  srv.Get(R"(/simulations/([^/]+)/metrics)", guarded([&svc](const auto& req, auto& res) {
            std::optional<double> alpha;
            if (req.has_param("alpha")) alpha = std::stod(req.get_param_value("alpha"));
            const std::string metric = req.has_param("metric") ? req.get_param_value("metric") : "running";
            send(res, 200, svc.simulation_metrics(req.matches[1], metric, alpha));
          }));

  srv.Post("/compare", guarded([&svc](const auto& req, auto& res) {
             const Json b = body_of(req);
             send(res, 200, svc.compare(series_from_json(b.at("real")), series_from_json(b.at("sim")),
                                        b.value("metric", std::string("running")), b.value("alpha", kDefaultAlpha)));
           }));

  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    ErrorInfo info{res.status, res.status == 404 ? "not_found" : "http", "no route for " + req.method + " " + req.path,
                   Json::object()};
    send(res, res.status, error_json(info));
  });
}

}  // namespace

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>()) { routes(impl_->server, service); }

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

std::pair<std::string, int> parse_bind_address(const std::string& s) {
  std::string host = "127.0.0.1";
  std::string port = s;
  if (const auto colon = s.rfind(':'); colon != std::string::npos) {
    if (colon > 0) host = s.substr(0, colon);
    port = s.substr(colon + 1);
  }
  int p = -1;
  auto [end, ec] = std::from_chars(port.data(), port.data() + port.size(), p);
  if (ec != std::errc() || end != port.data() + port.size() || p < 0 || p > 65535) {
    throw BadRequest("bad bind address '" + s + "' (expected host:port)");
  }
  return {host, p};
}

}  // namespace tracebench
