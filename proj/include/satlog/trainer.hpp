#pragma once

#include <string>
#include <vector>

#include "satlog/clustering.hpp"
#include "satlog/types.hpp"

namespace satlog {

struct TrainOptions {
  unsigned workers = 1;  // groups are clustered concurrently
  ClusteringLimits limits;
  std::int64_t trained_at = 0;  // unix seconds; 0 stamps the current time
};

struct TrainResult {
  ParseModel model;
  // Leaf reached by each input log during clustering (the "assigned"
  // template, as opposed to the one found by text matching).
  std::vector<NodeId> leaf_of_input;
};

/// Trains a fresh forest from deduplicated logs. Node ids are assigned in
/// GroupKey order, so the result does not depend on the worker count.
TrainResult train_model(const std::string& topic, const TopicConfig& config,
                        const std::vector<EncodedLog>& unique_logs,
                        const TrainOptions& options = {});

}  // namespace satlog
