#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "satlog/types.hpp"

namespace satlog {

struct LabeledCorpus {
  std::string name;
  std::vector<std::string> lines;
  std::vector<std::string> truth;  // ground-truth template or event id per line
};

/// Structured LogHub CSV: needs a Content column and an EventTemplate or
/// EventId column (EventTemplate wins when both exist). Throws kParse.
LabeledCorpus load_loghub(const std::string& path);
LabeledCorpus parse_loghub_csv(std::string_view text, std::string name = {});

/// Share of logs whose predicted group has exactly the members of their
/// ground-truth group. Throws kInvalidInput on empty or unequal inputs.
double grouping_accuracy(std::span<const std::uint64_t> predicted,
                         std::span<const std::uint64_t> truth);
double grouping_accuracy(std::span<const std::uint64_t> predicted,
                         std::span<const std::string> truth);

struct BenchReport {
  std::string dataset;
  double grouping_accuracy = 0.0;
  std::uint64_t total_logs = 0;
  double train_seconds = 0.0;  // preprocessing, dedup and training
  double match_seconds = 0.0;
  double throughput_logs_per_second = 0.0;
  // Threshold the predicted groups were resolved at; unset means leaves.
  std::optional<double> threshold;
  // Grouping accuracy when every log keeps the leaf clustering put it in.
  double assignment_grouping_accuracy = 0.0;
  std::uint64_t unique_logs = 0;
  std::uint64_t template_count = 0;
};

struct BenchOptions {
  TopicConfig config;
  unsigned workers = 1;
  std::vector<double> thresholds;  // extra reports resolved at these saturations
};

/// Trains on the corpus, matches every line and scores the leaf tier, then
/// once per requested threshold. Timing covers preprocessing, training and
/// matching only.
std::vector<BenchReport> run_benchmark(const LabeledCorpus& corpus, const BenchOptions& options);

struct ScalingPoint {
  std::uint64_t n = 0;
  double seconds = 0.0;
};

/// Train+match wall time on each prefix size, the fastest of `repeats`
/// runs. Sizes must ascend and not exceed the corpus and repeats must be
/// positive. Throws kInvalidInput otherwise.
std::vector<ScalingPoint> scaling_run(std::span<const std::string> lines,
                                      std::span<const std::uint64_t> sizes,
                                      const BenchOptions& options, unsigned repeats = 1);

/// Least-squares slope of ln(seconds) against ln(n). Needs two points.
double loglog_slope(std::span<const ScalingPoint> points);

/// Deterministic synthetic service log stream with ground-truth labels,
/// mixing constant skeletons with numeric, address and identifier fields.
LabeledCorpus generate_corpus(std::uint64_t n, std::uint64_t seed);

std::string report_to_json(const BenchReport& report);

}  // namespace satlog
