#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "satlog/satlog.h"

using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Failure {
  int exit_code;
  std::string message;
};

bool color_enabled() {
  const char* no_color = std::getenv("NO_COLOR");
  if (no_color && *no_color) return false;
  return isatty(STDERR_FILENO) != 0;
}

void report(const std::string& kind, const std::string& message) {
  if (color_enabled()) {
    std::cerr << "satlog: \033[31m" << kind << "\033[0m: " << message << "\n";
  } else {
    std::cerr << "satlog: " << kind << ": " << message << "\n";
  }
}

void check(satlog_status status, const std::string& context) {
  if (status == SATLOG_OK) return;
  const int code = status == SATLOG_ERR_INVALID_INPUT ? kExitUsage : kExitFailure;
  throw Failure{code, context + ": " + satlog_status_name(status) + ": " + satlog_last_error()};
}

// Owns a string returned by the library.
struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { satlog_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct ModelHandle {
  satlog_model* p = nullptr;
  ~ModelHandle() { satlog_model_free(p); }
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitUsage, "cannot open " + path};
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

struct Globals {
  bool json_output = false;
  std::optional<std::uint64_t> seed;
  std::string config_path;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
};

// Config JSON for the library, or nullopt to let it choose. --seed
// overrides the config's seed.
std::optional<std::string> resolve_config(const Globals& g, const std::string& preset = {}) {
  json config;
  if (!g.config_path.empty()) {
    OwnedString s;
    check(satlog_config_load(g.config_path.c_str(), &s.p), "config " + g.config_path);
    config = json::parse(s.str());
  } else if (!preset.empty()) {
    OwnedString s;
    if (satlog_config_preset(preset.c_str(), &s.p) != SATLOG_OK) {
      if (!g.seed) return std::nullopt;
      check(satlog_config_default(&s.p), "default config");
    }
    config = json::parse(s.str());
  } else {
    if (!g.seed) return std::nullopt;
    OwnedString s;
    check(satlog_config_default(&s.p), "default config");
    config = json::parse(s.str());
  }
  if (g.seed) config["rng_seed"] = *g.seed;
  return config.dump();
}

const char* c_or_null(const std::optional<std::string>& s) { return s ? s->c_str() : nullptr; }

std::string fmt_double(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

int cmd_train(const Globals& g, const std::string& log, const std::string& output,
              const std::string& topic, std::int64_t trained_at) {
  const auto config = resolve_config(g);
  ModelHandle model;
  check(satlog_train_file(topic.c_str(), c_or_null(config), log.c_str(), g.workers, trained_at,
                          &model.p),
        "train " + log);
  check(satlog_model_save(model.p, output.c_str()), "save " + output);
  OwnedString rows;
  check(satlog_query_json(model.p, 1.0, &rows.p), "query");
  const json templates = json::parse(rows.str());
  const std::size_t nodes = satlog_model_node_count(model.p);
  if (g.json_output) {
    std::cout << json{{"model", output},
                      {"nodes", nodes},
                      {"templates", templates.size()}}
                     .dump()
              << "\n";
  } else {
    std::cout << "model\t" << output << "\nnodes\t" << nodes << "\ntemplates\t"
              << templates.size() << "\n";
  }
  return 0;
}

int cmd_match(const Globals& g, const std::string& log, const std::string& model_path,
              bool insert_unmatched, const std::string& save_path) {
  ModelHandle model;
  check(satlog_model_load(model_path.c_str(), &model.p), "load " + model_path);
  const auto lines = read_lines(log);
  std::vector<const char*> ptrs;
  ptrs.reserve(lines.size());
  for (const auto& l : lines) ptrs.push_back(l.c_str());
  std::vector<satlog_match> results(lines.size());
  check(satlog_match_lines(model.p, ptrs.data(), ptrs.size(), insert_unmatched ? 1 : 0,
                           results.data()),
        "match " + log);
  std::string out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const satlog_match& r = results[i];
    std::string display;
    if (r.node_id) {
      OwnedString d;
      check(satlog_node_display(model.p, r.node_id, &d.p), "display");
      display = d.str();
    }
    if (g.json_output) {
      json row = {{"line", i + 1}};
      if (r.node_id) {
        row["node_id"] = r.node_id;
        row["saturation"] = r.saturation;
        row["matched"] = r.matched != 0;
        row["template"] = display;
      } else {
        row["node_id"] = nullptr;
        row["matched"] = false;
      }
      out += row.dump();
    } else {
      out += std::to_string(i + 1);
      out += '\t';
      out += r.node_id ? std::to_string(r.node_id) : "-";
      out += '\t';
      out += r.node_id ? (r.matched ? "matched" : "inserted") : (r.has_tokens ? "unmatched" : "empty");
      out += '\t';
      out += display;
    }
    out += '\n';
  }
  std::cout << out;
  if (!save_path.empty()) check(satlog_model_save(model.p, save_path.c_str()), "save " + save_path);
  return 0;
}

int cmd_query(const Globals& g, const std::string& model_path, double threshold) {
  ModelHandle model;
  check(satlog_model_load(model_path.c_str(), &model.p), "load " + model_path);
  OwnedString rows;
  check(satlog_query_json(model.p, threshold, &rows.p), "query");
  for (const auto& r : json::parse(rows.str())) {
    if (g.json_output) {
      std::cout << r.dump() << "\n";
    } else {
      std::cout << r["log_count"].get<std::uint64_t>() << '\t'
                << fmt_double(r["saturation"].get<double>()) << '\t'
                << r["node_id"].get<std::uint64_t>() << '\t'
                << r["display_text"].get<std::string>() << "\n";
    }
  }
  return 0;
}

void print_report(const Globals& g, const json& r) {
  if (g.json_output) {
    std::cout << r.dump() << "\n";
    return;
  }
  const std::string tier =
      r.contains("threshold") && !r["threshold"].is_null() ? fmt_double(r["threshold"], 2) : "leaf";
  std::cout << r["dataset"].get<std::string>() << '\t' << tier << '\t'
            << fmt_double(r["grouping_accuracy"]) << '\t'
            << fmt_double(r["assignment_grouping_accuracy"]) << '\t'
            << r["total_logs"].get<std::uint64_t>() << '\t'
            << r["template_count"].get<std::uint64_t>() << '\t'
            << fmt_double(r["train_seconds"], 3) << '\t' << fmt_double(r["match_seconds"], 3)
            << '\t' << static_cast<std::uint64_t>(r["throughput_logs_per_second"].get<double>())
            << "\n";
}

std::string dataset_of(const std::string& path) {
  std::string base = path.substr(path.find_last_of('/') + 1);
  return base.substr(0, base.find('_'));
}

int cmd_bench(const Globals& g, const std::vector<std::string>& csvs,
              std::vector<double> thresholds, bool sweep, const std::vector<std::uint64_t>& sizes,
              std::uint64_t synthetic) {
  if (sweep && thresholds.empty()) thresholds = {0.3, 0.5, 0.7, 0.9};
  if (!g.json_output) {
    std::cout << "dataset\ttier\tga\tassign_ga\tlogs\ttemplates\ttrain_s\tmatch_s\tlogs_per_s\n";
  }
  if (synthetic) {
    const auto config = resolve_config(g);
    OwnedString out;
    check(satlog_bench_synthetic_json(synthetic, g.seed.value_or(1), c_or_null(config), g.workers,
                                      thresholds.data(), thresholds.size(), &out.p),
          "bench synthetic");
    for (const auto& r : json::parse(out.str())) print_report(g, r);
  }
  for (const auto& csv : csvs) {
    const auto config = resolve_config(g, dataset_of(csv));
    if (!sizes.empty()) {
      OwnedString out;
      check(satlog_scaling_json(csv.c_str(), c_or_null(config), g.workers, sizes.data(),
                                sizes.size(), &out.p),
            "bench " + csv);
      const json result = json::parse(out.str());
      if (g.json_output) {
        std::cout << result.dump() << "\n";
      } else {
        for (const auto& p : result["points"])
          std::cout << "scaling\t" << p["n"].get<std::uint64_t>() << '\t'
                    << fmt_double(p["seconds"], 4) << "\n";
        if (result.contains("slope"))
          std::cout << "slope\t" << fmt_double(result["slope"]) << "\n";
      }
      continue;
    }
    OwnedString out;
    check(satlog_bench_json(csv.c_str(), c_or_null(config), g.workers, thresholds.data(),
                            thresholds.size(), &out.p),
          "bench " + csv);
    for (const auto& r : json::parse(out.str())) print_report(g, r);
  }
  return 0;
}

int cmd_serve(const std::string& config) {
  check(satlog_serve(config.c_str()), "serve " + config);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Precision-adjustable log template parser", "satlog"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(satlog_version()));

  Globals g;
  app.add_flag("--json", g.json_output, "Print one JSON object per line");
  app.add_option("--seed", g.seed, "Seed for sampling and synthetic corpora");
  app.add_option("--config", g.config_path, "Topic config file (JSON)")->check(CLI::ExistingFile);
  app.add_option("--workers", g.workers,
                 "Engine threads (default: available cores; 1-5 keeps a shared host responsive)")
      ->check(CLI::PositiveNumber);
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "More diagnostics on stderr (repeatable)");

  std::string log_path, model_path, output, topic = "default", save_path;
  std::int64_t trained_at = 0;
  auto* train = app.add_subcommand("train", "Train a model from a raw log file");
  train->add_option("logfile", log_path, "Raw log file, one entry per line")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("-o,--output", output, "Model file to write")->required();
  train->add_option("--topic", topic, "Topic name recorded in the model");
  train->add_option("--trained-at", trained_at, "Unix timestamp for the model header")
      ->check(CLI::NonNegativeNumber);

  bool insert_unmatched = false;
  auto* match = app.add_subcommand("match", "Match a log file against a model");
  match->add_option("logfile", log_path, "Raw log file")->required()->check(CLI::ExistingFile);
  match->add_option("-m,--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  match->add_flag("--insert-unmatched", insert_unmatched,
                  "Give unmatched lines temporary templates");
  match->add_option("--save", save_path, "Write the model (with inserted nodes) here");

  double threshold = 1.0;
  auto* query = app.add_subcommand("query", "List templates at a saturation threshold");
  query->add_option("-m,--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  query->add_option("-t,--threshold", threshold, "Saturation threshold in [0,1]")
      ->check(CLI::Range(0.0, 1.0));

  std::vector<std::string> csvs;
  std::vector<double> thresholds;
  std::vector<std::uint64_t> sizes;
  bool sweep = false;
  std::uint64_t synthetic = 0;
  auto* bench = app.add_subcommand("bench", "Score grouping accuracy on LogHub structured CSVs");
  bench->add_option("csv", csvs, "*_structured.csv files")->check(CLI::ExistingFile);
  bench->add_flag("--threshold-sweep", sweep, "Also score thresholds 0.3, 0.5, 0.7, 0.9");
  bench->add_option("--thresholds", thresholds, "Explicit thresholds to score")
      ->check(CLI::Range(0.0, 1.0));
  bench->add_option("--sizes", sizes, "Prefix sizes for a scaling run (ascending)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--synthetic", synthetic, "Benchmark N generated lines instead")
      ->check(CLI::PositiveNumber);

  std::string server_config;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", server_config, "Server config file")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("usage error", e.what());
    std::cerr << "run 'satlog --help' for usage\n";
    return kExitUsage;
  }
  if (bench->parsed() && csvs.empty() && synthetic == 0) {
    report("usage error", "bench needs at least one CSV or --synthetic N");
    return kExitUsage;
  }
  satlog_set_log_level(verbosity >= 2 ? 0 : verbosity == 1 ? 1 : 2);

  try {
    if (train->parsed()) return cmd_train(g, log_path, output, topic, trained_at);
    if (match->parsed()) return cmd_match(g, log_path, model_path, insert_unmatched, save_path);
    if (query->parsed()) return cmd_query(g, model_path, threshold);
    if (bench->parsed()) return cmd_bench(g, csvs, thresholds, sweep, sizes, synthetic);
    if (serve->parsed()) return cmd_serve(server_config);
  } catch (const Failure& f) {
    report(f.exit_code == kExitUsage ? "usage error" : "error", f.message);
    return f.exit_code;
  } catch (const std::exception& e) {
    report("error", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
