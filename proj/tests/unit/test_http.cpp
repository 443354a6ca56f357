#include <doctest.h>

#include <fstream>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "../support/fixtures.hpp"
#include "satlog/error.hpp"
#include "satlog/http_server.hpp"
#include "satlog/model.hpp"

using namespace satlog;
using json = nlohmann::json;

namespace {

// Service plus a server on a free loopback port, torn down on scope exit.
struct Harness {
  Service service;
  HttpServer server{service};
  std::thread thread;
  int port = 0;

  Harness() : service(make_options()) {
    port = server.bind("127.0.0.1", 0);
    thread = std::thread([this] { server.serve(); });
  }
  ~Harness() {
    server.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60, 0);
    return c;
  }
  static ServiceOptions make_options() {
    ServiceOptions o;
    o.background_training = false;
    return o;
  }
};

std::string join_lines(const std::vector<std::string>& lines) {
  std::string body;
  for (const auto& l : lines) body += l + "\n";
  return body;
}

}  // namespace

TEST_CASE("http endpoints cover the topic lifecycle") {
  Harness h;
  auto c = h.client();

  auto health = c.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");

  auto put = c.Put("/topics/lock", "{}", "application/json");
  REQUIRE(put);
  CHECK(put->status == 200);
  CHECK(json::parse(put->body)["topic"] == "lock");

  auto list = c.Get("/topics");
  REQUIRE(list);
  CHECK(json::parse(list->body) == json::array({"lock"}));

  auto lines = testing::android_lock_lines(2000, 1);
  auto first = c.Post("/topics/lock/logs", join_lines(lines), "text/plain");
  REQUIRE(first);
  CHECK(first->status == 200);
  auto results = json::parse(first->body);
  REQUIRE(results.size() == lines.size());
  for (const auto& r : results) CHECK(r["matched"] == false);

  auto train = c.Post("/topics/lock/train", "", "text/plain");
  REQUIRE(train);
  CHECK(train->status == 200);
  CHECK(json::parse(train->body)["version"].get<std::uint64_t>() >= 1);

  auto second = c.Post("/topics/lock/logs", join_lines(lines), "text/plain");
  REQUIRE(second);
  for (const auto& r : json::parse(second->body)) CHECK(r["matched"] == true);

  auto status = c.Get("/topics/lock");
  REQUIRE(status);
  CHECK(json::parse(status->body)["model_version"].get<std::uint64_t>() >= 1);

  auto coarse = c.Get("/topics/lock/templates?threshold=0");
  REQUIRE(coarse);
  CHECK(coarse->status == 200);
  CHECK(json::parse(coarse->body).size() == 1);

  auto fine = c.Get("/topics/lock/templates?threshold=1");
  REQUIRE(fine);
  auto rows = json::parse(fine->body);
  REQUIRE(rows.size() > 1);
  const auto leaf = rows[0]["node_id"].get<std::uint64_t>();

  auto anc = c.Get("/topics/lock/templates/" + std::to_string(leaf) + "/ancestors");
  REQUIRE(anc);
  CHECK(anc->status == 200);
  auto view = json::parse(anc->body);
  CHECK(view["node"]["node_id"] == leaf);
  REQUIRE(view["ancestors"].size() >= 1);
  double last = view["node"]["saturation"].get<double>();
  for (const auto& a : view["ancestors"]) {
    CHECK(a["saturation"].get<double>() < last);
    last = a["saturation"].get<double>();
  }

  auto model = c.Get("/topics/lock/model");
  REQUIRE(model);
  CHECK(model->status == 200);
  auto parsed = deserialize_model(model->body);
  CHECK(parsed.topic == "lock");
}

TEST_CASE("http errors map to status codes") {
  Harness h;
  auto c = h.client();
  REQUIRE(c.Put("/topics/t", "{}", "application/json"));

  auto missing = c.Get("/topics/none/templates");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["error"] == "not found");

  auto no_node = c.Get("/topics/t/templates/999/ancestors");
  REQUIRE(no_node);
  CHECK(no_node->status == 404);

  auto bad_threshold = c.Get("/topics/t/templates?threshold=1.5");
  REQUIRE(bad_threshold);
  CHECK(bad_threshold->status == 400);

  auto not_number = c.Get("/topics/t/templates?threshold=abc");
  REQUIRE(not_number);
  CHECK(not_number->status == 400);

  auto bad_json = c.Put("/topics/t", "{not json", "application/json");
  REQUIRE(bad_json);
  CHECK(bad_json->status == 400);

  auto bad_config = c.Put("/topics/t", R"({"merge_similarity_threshold": 7})", "application/json");
  REQUIRE(bad_config);
  CHECK(bad_config->status == 400);

  auto post_missing = c.Post("/topics/none/logs", "a b\n", "text/plain");
  REQUIRE(post_missing);
  CHECK(post_missing->status == 404);
}

TEST_CASE("empty and blank lines keep their positions") {
  Harness h;
  auto c = h.client();
  REQUIRE(c.Put("/topics/t", "{}", "application/json"));
  auto res = c.Post("/topics/t/logs", "a b\r\n\nc d\n", "text/plain");
  REQUIRE(res);
  auto body = json::parse(res->body);
  REQUIRE(body.size() == 3);
  CHECK(body[1].is_null());
  CHECK(body[0]["matched"] == false);
  auto empty = c.Post("/topics/t/logs", "", "text/plain");
  REQUIRE(empty);
  CHECK(json::parse(empty->body).empty());
}

TEST_CASE("server config files resolve topic configs relative to themselves") {
  const auto dir = std::filesystem::temp_directory_path() / "satlog_http_config";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "lock.json") << R"({"prefix_k": 1})";
  std::ofstream(dir / "server.json")
      << R"({"listen": "127.0.0.1:0", "data_dir": "data", "workers": 2,
             "topics": {"lock": "lock.json", "inline": {"sample_cap": 50}}})";
  auto cfg = load_server_config((dir / "server.json").string());
  CHECK(cfg.host == "127.0.0.1");
  CHECK(cfg.port == 0);
  CHECK(cfg.workers == 2);
  CHECK(cfg.data_dir == (dir / "data").string());
  CHECK(cfg.topics.at("lock").prefix_k == 1);
  CHECK(cfg.topics.at("inline").sample_cap == 50);

  std::ofstream(dir / "bad.json") << R"({"listen": "nowhere"})";
  CHECK_THROWS_AS(load_server_config((dir / "bad.json").string()), satlog::Error);
  CHECK_THROWS_AS(load_server_config((dir / "absent.json").string()), satlog::Error);
  std::filesystem::remove_all(dir);
}
