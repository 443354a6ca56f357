#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "satlog/types.hpp"

namespace satlog {

enum class PositionClass {
  kConstant,       // one distinct token
  kFullyVariable,  // a distinct token in every unique log (needs >= 3 logs)
  kUnresolved,
};

// Position-wise token frequencies of a set of logs, weighted by multiplicity.
class ClusterStats {
 public:
  ClusterStats() = default;

  /// Counts duplicate hash vectors once toward unique_count(). Throws
  /// kInternal when the logs do not share one length.
  static ClusterStats build(std::span<const EncodedLog> logs);
  // For callers that already hold deduplicated logs.
  static ClusterStats build_unique(std::span<const EncodedLog* const> logs);

  std::size_t positions() const noexcept { return positions_.size(); }
  std::uint64_t total() const noexcept { return total_; }
  std::size_t unique_count() const noexcept { return unique_; }

  std::uint64_t frequency(std::size_t pos, TokenHash h) const noexcept;
  std::size_t distinct(std::size_t pos) const noexcept { return positions_[pos].freq.size(); }
  const absl::flat_hash_map<TokenHash, std::uint64_t>& frequencies(std::size_t pos) const {
    return positions_[pos].freq;
  }
  PositionClass position_class(std::size_t pos) const noexcept;
  // Token text of the first log at `pos`; the literal for constant positions.
  const std::string& representative(std::size_t pos) const { return positions_[pos].text; }

  // Importance weight of a position: 1/(n_i - 1), or 2 for constant positions.
  double weight(std::size_t pos) const noexcept;
  double weight_sum() const noexcept { return weight_sum_; }

 private:
  struct Position {
    absl::flat_hash_map<TokenHash, std::uint64_t> freq;  // open addressing keeps lookups cache-friendly
    std::string text;
  };
  void finish();

  std::vector<Position> positions_;
  std::vector<double> weights_;
  double weight_sum_ = 0.0;
  std::uint64_t total_ = 0;
  std::size_t unique_ = 0;
};

std::vector<PositionClass> classify(const ClusterStats& stats);

/// Weighted share of the cluster that agrees with `log` position by
/// position. 1.0 means every position hits the cluster's unanimous token.
/// Throws kInvalidInput on a length mismatch.
double positional_similarity(const EncodedLog& log, const ClusterStats& stats);
double positional_similarity(std::span<const TokenHash> hashes, const ClusterStats& stats);

/// How completely the positions are resolved into constants or variables,
/// in [0,1]; 1 means every position is constant or fully variable.
double saturation(const ClusterStats& stats);

/// Position i becomes a literal when constant, a wildcard otherwise.
Template template_of(const ClusterStats& stats);

// A partition of a log list, as indices into it.
using Partition = std::vector<std::vector<std::size_t>>;

/// Terminal singleton partition when further clustering cannot produce
/// anything but singletons; nullopt when clustering should proceed.
/// `stats` must describe exactly the deduplicated `logs`.
std::optional<Partition> early_stop(const ClusterStats& stats,
                                    std::span<const EncodedLog> logs);

struct ClusteringLimits {
  std::size_t max_refine_iterations = 10;
  std::size_t depth_factor = 2;  // depth cap = depth_factor * token length
  std::size_t cluster_factor = 2;  // clusters per split <= cluster_factor * token length
};

/// One K-Means-style split of deduplicated `logs`. Every returned part has
/// saturation strictly above `parent_saturation`. When the cluster budget
/// runs out, clusters that failed to improve are split into single logs.
Partition cluster_once(std::span<const EncodedLog> logs, double parent_saturation,
                       std::mt19937_64& rng, const ClusteringLimits& limits = {});

struct TreeNode {
  std::optional<std::size_t> parent;  // index into Tree::nodes
  std::vector<std::size_t> children;
  Template tmpl;
  double saturation = 0.0;
  std::uint64_t log_count = 0;
  bool depth_capped = false;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root, parents precede children
  std::vector<EncodedLog> logs;  // deduplicated input
  std::vector<std::size_t> leaf_of_log;  // per entry of `logs`
};

/// Hierarchical clustering of one initial group. Input may contain
/// duplicates; they are merged before clustering.
Tree build_tree(std::vector<EncodedLog> group_logs, std::mt19937_64& rng,
                const ClusteringLimits& limits = {});

}  // namespace satlog
