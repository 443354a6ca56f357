#pragma once

#include <map>
#include <memory>
#include <string>

#include "satlog/service.hpp"

namespace satlog {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
  unsigned workers = 1;
  std::map<std::string, TopicConfig> topics;  // created at startup
};

/// {"listen": "host:port", "data_dir": ..., "workers": N,
///  "topics": {"name": "config.json" | {inline config}}}. Relative config
/// paths resolve against the server config's directory. Throws kConfig.
ServerConfig load_server_config(const std::string& path);

// HTTP front end over a Service. Routes:
//   PUT  /topics/{t}                         TopicConfig JSON
//   POST /topics/{t}/logs                    newline-delimited raw logs
//   POST /topics/{t}/train
//   GET  /topics/{t}/templates?threshold=T
//   GET  /topics/{t}/templates/{id}/ancestors
//   GET  /topics/{t}/model
//   GET  /topics, /topics/{t}, /healthz
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  /// Binds without serving; port 0 picks a free port. Returns the port or
  /// throws kIo.
  int bind(const std::string& host, int port);
  /// Serves until stop(); also drives time-based training triggers.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Loads the config, restores topics and serves until SIGINT/SIGTERM.
void run_server(const ServerConfig& config);

}  // namespace satlog
