#include "satlog/http_server.hpp"

#include <atomic>
#include <condition_variable>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "satlog/config.hpp"
#include "satlog/error.hpp"
#include "satlog/log.hpp"

namespace satlog {

using nlohmann::json;
namespace fs = std::filesystem;

ServerConfig load_server_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot open server config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, "server config " + path + ": " + e.what());
  }
  ServerConfig c;
  const fs::path base = fs::path(path).parent_path();
  try {
    if (j.contains("listen")) {
      const std::string listen = j.at("listen").get<std::string>();
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos)
        fail(ErrorCode::kConfig, "listen must be host:port (got '" + listen + "')");
      c.host = listen.substr(0, colon);
      c.port = std::stoi(listen.substr(colon + 1));
    }
    if (j.contains("data_dir")) {
      fs::path d = j.at("data_dir").get<std::string>();
      c.data_dir = (d.is_relative() ? base / d : d).string();
    }
    c.workers = j.value("workers", 1u);
    if (j.contains("topics")) {
      for (const auto& [name, v] : j.at("topics").items()) {
        if (v.is_string()) {
          fs::path p = v.get<std::string>();
          c.topics[name] = load_config_file((p.is_relative() ? base / p : p).string());
        } else {
          c.topics[name] = config_from_json(v);
        }
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, "server config " + path + ": " + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::kConfig, "server config " + path + ": bad port");
  } catch (const std::out_of_range&) {
    fail(ErrorCode::kConfig, "server config " + path + ": bad port");
  }
  if (c.port < 0 || c.port > 65535) fail(ErrorCode::kConfig, "port out of range");
  return c;
}

namespace {

int status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kInvalidInput:
    case ErrorCode::kConfig:
    case ErrorCode::kParse: return 400;
    case ErrorCode::kIncompatibleModel: return 409;
    default: return 500;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind,
                const std::string& message) {
  send_json(res, {{"error", kind}, {"message", message}}, status);
}

json row_json(const TemplateRow& r) {
  return {{"node_id", r.node_id},
          {"display_text", r.display_text},
          {"saturation", r.saturation},
          {"log_count", r.log_count}};
}

json node_json(const AncestorRow& r) {
  return {{"node_id", r.node_id},
          {"display_text", r.display_text},
          {"saturation", r.saturation},
          {"log_count", r.log_count}};
}

std::vector<std::string> split_lines(const std::string& body) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < body.size()) {
    std::size_t end = body.find('\n', start);
    if (end == std::string::npos) end = body.size();
    std::size_t len = end - start;
    if (len && body[start + len - 1] == '\r') --len;
    lines.emplace_back(body, start, len);
    start = end + 1;
  }
  return lines;
}

// Wraps a handler so library errors become JSON error responses.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, status_of(e.code()), error_code_name(e.code()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "parse error", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal error", e.what());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  std::thread ticker;
  std::mutex tick_mu;
  std::condition_variable tick_cv;
  bool stopping = false;

  explicit Impl(Service& s) : service(s) { routes(); }

  void routes() {
    server.Get("/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
                 send_json(res, {{"status", "ok"}});
               }));

    server.Get("/topics", guarded([this](const httplib::Request&, httplib::Response& res) {
                 send_json(res, service.topics());
               }));

    server.Put(R"(/topics/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string topic = req.matches[1];
                 json body = req.body.empty() ? json::object() : json::parse(req.body);
                 TopicConfig config = config_from_json(body);
                 service.put_topic(topic, config);
                 send_json(res, {{"topic", topic},
                                 {"config_fingerprint", config_fingerprint(config)},
                                 {"config", config_to_json(config)}});
               }));

    server.Get(R"(/topics/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const TopicStatus s = service.status(req.matches[1]);
                 send_json(res, {{"topic", std::string(req.matches[1])},
                                 {"model_version", s.model_version},
                                 {"node_count", s.node_count},
                                 {"buffered_logs", s.buffered_logs},
                                 {"buffered_unique", s.buffered_unique},
                                 {"matched_logs", s.matched_logs},
                                 {"training", s.training}});
               }));

    server.Post(R"(/topics/([^/]+)/logs)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto lines = split_lines(req.body);
                  const auto results = service.ingest(req.matches[1], lines);
                  json out = json::array();
                  for (const auto& r : results) {
                    if (!r) {
                      out.push_back(nullptr);
                      continue;
                    }
                    out.push_back({{"node_id", r->node_id},
                                   {"saturation", r->saturation},
                                   {"matched", r->matched}});
                  }
                  send_json(res, out);
                }));

    server.Post(R"(/topics/([^/]+)/train)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, {{"version", service.train(req.matches[1])}});
                }));

    server.Get(R"(/topics/([^/]+)/templates)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 double threshold = 1.0;
                 if (req.has_param("threshold")) {
                   const std::string raw = req.get_param_value("threshold");
                   std::size_t used = 0;
                   try {
                     threshold = std::stod(raw, &used);
                   } catch (const std::exception&) {
                     used = 0;
                   }
                   if (used == 0 || used != raw.size())
                     fail(ErrorCode::kInvalidInput, "threshold must be a number in [0,1]");
                 }
                 json out = json::array();
                 for (const auto& r : service.query(req.matches[1], threshold))
                   out.push_back(row_json(r));
                 send_json(res, out);
               }));

    server.Get(R"(/topics/([^/]+)/templates/(\d+)/ancestors)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const NodeId id = std::stoull(req.matches[2]);
                 const NodeView v = service.node_view(req.matches[1], id);
                 json anc = json::array();
                 for (const auto& a : v.ancestors) anc.push_back(node_json(a));
                 json kids = json::array();
                 for (const auto& c : v.children) kids.push_back(node_json(c));
                 send_json(res, {{"node", node_json(v.node)},
                                 {"ancestors", anc},
                                 {"children", kids}});
               }));

    server.Get(R"(/topics/([^/]+)/model)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 res.set_content(service.model_text(req.matches[1]), "application/json");
               }));

    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      log_info(req.method + " " + req.path + " -> " + std::to_string(res.status));
    });
  }

  void start_ticker() {
    ticker = std::thread([this] {
      std::unique_lock lock(tick_mu);
      while (!stopping) {
        tick_cv.wait_for(lock, std::chrono::seconds(1));
        if (stopping) break;
        lock.unlock();
        service.tick();
        lock.lock();
      }
    });
  }

  void stop_ticker() {
    {
      std::lock_guard lock(tick_mu);
      stopping = true;
    }
    tick_cv.notify_all();
    if (ticker.joinable()) ticker.join();
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() {
  stop();
  impl_->stop_ticker();
}

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) fail(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    fail(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::serve() {
  impl_->start_ticker();
  impl_->server.listen_after_bind();
  impl_->stop_ticker();
}

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

namespace {

std::atomic<HttpServer*> g_running{nullptr};

extern "C" void handle_stop_signal(int) {
  // httplib's stop() only shuts the listening socket down, which is safe
  // enough from a signal handler for this CLI use.
  if (HttpServer* s = g_running.load()) s->stop();
}

}  // namespace

void run_server(const ServerConfig& config) {
  ServiceOptions opts;
  opts.data_dir = config.data_dir;
  opts.workers = config.workers;
  Service service(opts);
  for (const auto& [name, topic_config] : config.topics) {
    bool exists = false;
    for (const auto& t : service.topics()) exists |= t == name;
    if (!exists) service.put_topic(name, topic_config);
  }
  HttpServer server(service);
  const int port = server.bind(config.host, config.port);
  log_message(LogLevel::kWarn, "serving on " + config.host + ":" + std::to_string(port));
  g_running = &server;
  auto prev_int = std::signal(SIGINT, handle_stop_signal);
  auto prev_term = std::signal(SIGTERM, handle_stop_signal);
  server.serve();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  g_running = nullptr;
  service.drain();
}

}  // namespace satlog
