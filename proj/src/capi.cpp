#include "satlog/satlog.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "satlog/config.hpp"
#include "satlog/error.hpp"
#include "satlog/evaluation.hpp"
#include "satlog/http_server.hpp"
#include "satlog/log.hpp"
#include "satlog/matcher.hpp"
#include "satlog/model.hpp"
#include "satlog/preprocess.hpp"
#include "satlog/trainer.hpp"

using nlohmann::json;

struct satlog_model {
  explicit satlog_model(satlog::ParseModel m)
      : preprocessor(m.config), matcher(std::move(m)) {}

  std::shared_ptr<const satlog::ParseModel> model() const {
    return matcher.snapshot()->model;
  }

  satlog::Preprocessor preprocessor;
  satlog::Matcher matcher;
};

namespace {

thread_local std::string g_last_error;

satlog_status record(satlog_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `f`, translating exceptions into status codes at the boundary.
template <typename F>
satlog_status guarded(F&& f) noexcept {
  try {
    f();
    g_last_error.clear();
    return SATLOG_OK;
  } catch (const satlog::Error& e) {
    return record(static_cast<satlog_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return record(SATLOG_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return record(SATLOG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(SATLOG_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(SATLOG_ERR_INTERNAL, "unknown failure");
  }
}

void require(const void* p, const char* what) {
  if (!p) satlog::fail(satlog::ErrorCode::kInvalidInput, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

satlog::TopicConfig config_or_default(const char* config_json) {
  if (!config_json) return satlog::default_topic_config();
  satlog::TopicConfig c = satlog::config_from_json(json::parse(config_json));
  satlog::validate_config(c);
  return c;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) satlog::fail(satlog::ErrorCode::kIo, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) satlog::fail(satlog::ErrorCode::kIo, "read error on " + path);
  return lines;
}

satlog_model* train(const char* topic, const char* config_json,
                    const std::vector<std::string>& lines, unsigned workers,
                    int64_t trained_at) {
  const satlog::TopicConfig config = config_or_default(config_json);
  satlog::Preprocessor pre(config);
  auto batch = pre.process_batch(lines, workers ? workers : 1);
  satlog::TrainOptions options;
  options.workers = workers ? workers : 1;
  options.trained_at = trained_at;
  auto result = satlog::train_model(topic ? topic : "default", config, batch.unique, options);
  return new satlog_model(std::move(result.model));
}

json row_json(const satlog::ClusterNode& n) {
  return {{"node_id", n.id},
          {"display_text", satlog::display_template(n.tmpl)},
          {"saturation", n.saturation},
          {"log_count", n.log_count}};
}

json report_json(const satlog::BenchReport& r) {
  return json::parse(satlog::report_to_json(r));
}

satlog::BenchOptions bench_options(const satlog::LabeledCorpus& corpus,
                                   const char* config_json, unsigned workers) {
  satlog::BenchOptions options;
  if (config_json) {
    options.config = config_or_default(config_json);
  } else if (auto preset = satlog::loghub_preset(corpus.name)) {
    options.config = *preset;
  } else {
    options.config = satlog::default_topic_config();
  }
  options.workers = workers ? workers : 1;
  return options;
}

}  // namespace

extern "C" {

const char* satlog_version(void) { return "1.0.0"; }

const char* satlog_last_error(void) { return g_last_error.c_str(); }

const char* satlog_status_name(satlog_status status) {
  if (status == SATLOG_OK) return "ok";
  if (status < SATLOG_ERR_INVALID_INPUT || status > SATLOG_ERR_INTERNAL) return "unknown";
  return satlog::error_code_name(static_cast<satlog::ErrorCode>(status));
}

void satlog_string_free(char* s) { std::free(s); }

satlog_status satlog_config_default(char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    *out_json = dup_string(satlog::config_to_json(satlog::default_topic_config()).dump(2));
  });
}

satlog_status satlog_config_preset(const char* name, char** out_json) {
  return guarded([&] {
    require(name, "name");
    require(out_json, "out_json");
    auto preset = satlog::loghub_preset(name);
    if (!preset) satlog::fail(satlog::ErrorCode::kNotFound, std::string("no preset named ") + name);
    *out_json = dup_string(satlog::config_to_json(*preset).dump(2));
  });
}

satlog_status satlog_config_load(const char* path, char** out_json) {
  return guarded([&] {
    require(path, "path");
    require(out_json, "out_json");
    *out_json = dup_string(satlog::config_to_json(satlog::load_config_file(path)).dump());
  });
}

satlog_status satlog_train_lines(const char* topic, const char* config_json,
                                 const char* const* lines, size_t count, unsigned workers,
                                 int64_t trained_at, satlog_model** out) {
  return guarded([&] {
    require(out, "out");
    if (count) require(lines, "lines");
    std::vector<std::string> copy;
    copy.reserve(count);
    for (size_t i = 0; i < count; ++i) copy.emplace_back(lines[i] ? lines[i] : "");
    *out = train(topic, config_json, copy, workers, trained_at);
  });
}

satlog_status satlog_train_file(const char* topic, const char* config_json,
                                const char* log_path, unsigned workers, int64_t trained_at,
                                satlog_model** out) {
  return guarded([&] {
    require(out, "out");
    require(log_path, "log_path");
    *out = train(topic, config_json, read_lines(log_path), workers, trained_at);
  });
}

satlog_status satlog_model_load(const char* path, satlog_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new satlog_model(satlog::load_model(path));
  });
}

satlog_status satlog_model_deserialize(const char* text, size_t length, satlog_model** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new satlog_model(satlog::deserialize_model(std::string_view(text, length)));
  });
}

satlog_status satlog_model_save(const satlog_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    satlog::save_model(*model->model(), path);
  });
}

satlog_status satlog_model_serialize(const satlog_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = dup_string(satlog::serialize_model(*model->model()));
  });
}

void satlog_model_free(satlog_model* model) { delete model; }

size_t satlog_model_node_count(const satlog_model* model) {
  return model ? model->model()->nodes.size() : 0;
}

uint64_t satlog_model_version(const satlog_model* model) {
  return model ? model->model()->version : 0;
}

satlog_status satlog_match_lines(satlog_model* model, const char* const* lines, size_t count,
                                 int insert_unmatched, satlog_match* out) {
  return guarded([&] {
    require(model, "model");
    if (count == 0) return;
    require(lines, "lines");
    require(out, "out");
    std::vector<std::vector<satlog::TokenHash>> hashes(count);
    std::vector<std::string> scratch(count);
    std::vector<std::vector<std::string_view>> tokens(count);
    std::vector<satlog::Matcher::Item> items;
    std::vector<size_t> item_line;
    auto snap = model->matcher.snapshot();
    for (size_t i = 0; i < count; ++i) {
      out[i] = satlog_match{0, 0.0, 0, 0};
      const std::string_view raw = lines[i] ? lines[i] : "";
      if (!model->preprocessor.hashes_of(raw, hashes[i])) continue;
      out[i].has_tokens = 1;
      if (!insert_unmatched) {
        if (auto r = snap->index->match(hashes[i]))
          out[i] = satlog_match{r->node_id, r->saturation, 1, 1};
        continue;
      }
      tokens[i] = model->preprocessor.tokens_of(raw, scratch[i]);
      items.push_back({hashes[i], tokens[i]});
      item_line.push_back(i);
    }
    if (items.empty()) return;
    const auto results = model->matcher.match_or_insert(items);
    for (size_t k = 0; k < results.size(); ++k) {
      const auto& r = results[k];
      out[item_line[k]] = satlog_match{r.node_id, r.saturation, r.matched ? 1 : 0, 1};
    }
  });
}

satlog_status satlog_node_display(const satlog_model* model, uint64_t node, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = dup_string(satlog::display_template(model->model()->node(node).tmpl));
  });
}

satlog_status satlog_query_json(const satlog_model* model, double threshold, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    json rows = json::array();
    for (const auto& r : satlog::query_model(*model->model(), threshold)) {
      rows.push_back({{"node_id", r.node_id},
                      {"display_text", r.display_text},
                      {"saturation", r.saturation},
                      {"log_count", r.log_count}});
    }
    *out = dup_string(rows.dump());
  });
}

satlog_status satlog_ancestors_json(const satlog_model* model, uint64_t node, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    auto m = model->model();
    const auto chain = satlog::ancestor_chain(*m, node);
    json ancestors = json::array();
    for (size_t i = 1; i < chain.size(); ++i) ancestors.push_back(row_json(m->node(chain[i])));
    json children = json::array();
    for (satlog::NodeId c : m->node(node).children) children.push_back(row_json(m->node(c)));
    *out = dup_string(json{{"node", row_json(m->node(node))},
                           {"ancestors", ancestors},
                           {"children", children}}
                          .dump());
  });
}

satlog_status satlog_bench_json(const char* csv_path, const char* config_json, unsigned workers,
                                const double* thresholds, size_t threshold_count, char** out) {
  return guarded([&] {
    require(csv_path, "csv_path");
    require(out, "out");
    if (threshold_count) require(thresholds, "thresholds");
    const auto corpus = satlog::load_loghub(csv_path);
    auto options = bench_options(corpus, config_json, workers);
    options.thresholds.assign(thresholds, thresholds + threshold_count);
    json reports = json::array();
    for (const auto& r : satlog::run_benchmark(corpus, options)) reports.push_back(report_json(r));
    *out = dup_string(reports.dump());
  });
}

satlog_status satlog_bench_synthetic_json(uint64_t lines, uint64_t seed,
                                          const char* config_json, unsigned workers,
                                          const double* thresholds, size_t threshold_count,
                                          char** out) {
  return guarded([&] {
    require(out, "out");
    if (threshold_count) require(thresholds, "thresholds");
    const auto corpus = satlog::generate_corpus(lines, seed);
    satlog::BenchOptions options;
    options.config =
        config_json ? config_or_default(config_json) : satlog::synthetic_corpus_config();
    options.workers = workers ? workers : 1;
    options.thresholds.assign(thresholds, thresholds + threshold_count);
    json reports = json::array();
    for (const auto& r : satlog::run_benchmark(corpus, options)) reports.push_back(report_json(r));
    *out = dup_string(reports.dump());
  });
}

satlog_status satlog_scaling_json(const char* csv_path, const char* config_json,
                                  unsigned workers, const uint64_t* sizes, size_t size_count,
                                  char** out) {
  return guarded([&] {
    require(csv_path, "csv_path");
    require(sizes, "sizes");
    require(out, "out");
    const auto corpus = satlog::load_loghub(csv_path);
    const auto options = bench_options(corpus, config_json, workers);
    std::vector<std::uint64_t> n(sizes, sizes + size_count);
    const auto points = satlog::scaling_run(corpus.lines, n, options);
    json pts = json::array();
    for (const auto& p : points) pts.push_back({{"n", p.n}, {"seconds", p.seconds}});
    json result = {{"dataset", corpus.name}, {"points", pts}};
    if (points.size() >= 2) result["slope"] = satlog::loglog_slope(points);
    *out = dup_string(result.dump());
  });
}

satlog_status satlog_serve(const char* server_config_path) {
  return guarded([&] {
    require(server_config_path, "server_config_path");
    satlog::run_server(satlog::load_server_config(server_config_path));
  });
}

void satlog_set_log_level(int level) {
  if (level < 0) level = 0;
  if (level > 4) level = 4;
  satlog::set_log_level(static_cast<satlog::LogLevel>(level));
}

}  // extern "C"
