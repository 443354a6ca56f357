#include "satlog/trainer.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include "satlog/config.hpp"
#include "satlog/error.hpp"
#include "satlog/grouping.hpp"
#include "satlog/log.hpp"

namespace satlog {

namespace {

std::uint64_t group_seed(std::uint64_t seed, const GroupKey& key) {
  std::uint64_t h = mix64(seed ^ (0x51ed27a3ULL + key.length));
  for (TokenHash t : key.prefix) h = mix64(h ^ t);
  return h;
}

}  // namespace

TrainResult train_model(const std::string& topic, const TopicConfig& config,
                        const std::vector<EncodedLog>& unique_logs,
                        const TrainOptions& options) {
  auto groups = partition_indices(unique_logs, config.prefix_k);
  std::vector<const GroupKey*> keys;
  std::vector<const std::vector<std::size_t>*> members;
  for (const auto& [key, idx] : groups) {
    keys.push_back(&key);
    members.push_back(&idx);
  }

  std::vector<Tree> trees(keys.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t g = next++; g < keys.size(); g = next++) {
      std::vector<EncodedLog> logs;
      logs.reserve(members[g]->size());
      for (std::size_t i : *members[g]) logs.push_back(unique_logs[i]);
      std::mt19937_64 rng(group_seed(config.rng_seed, *keys[g]));
      trees[g] = build_tree(std::move(logs), rng, options.limits);
    }
  };
  const unsigned workers =
      std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(keys.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  TrainResult result;
  ParseModel& model = result.model;
  model.topic = topic;
  model.version = 1;
  model.config = config;
  model.config_fingerprint = config_fingerprint(config);
  model.trained_at = options.trained_at
                         ? options.trained_at
                         : std::chrono::duration_cast<std::chrono::seconds>(
                               std::chrono::system_clock::now().time_since_epoch())
                               .count();
  result.leaf_of_input.assign(unique_logs.size(), 0);

  NodeId next_id = 1;
  std::size_t capped = 0;
  for (std::size_t g = 0; g < keys.size(); ++g) {
    const Tree& tree = trees[g];
    const NodeId base = next_id;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& tn = tree.nodes[i];
      ClusterNode node;
      node.id = base + i;
      if (tn.parent) node.parent = base + *tn.parent;
      for (std::size_t c : tn.children) node.children.push_back(base + c);
      node.tmpl = tn.tmpl;
      node.saturation = tn.saturation;
      node.log_count = tn.log_count;
      node.group_key = *keys[g];
      capped += tn.depth_capped ? 1 : 0;
      model.nodes.emplace(node.id, std::move(node));
    }
    model.roots.emplace(*keys[g], base);
    next_id = base + tree.nodes.size();

    const auto& idx = *members[g];
    if (tree.logs.size() != idx.size())
      fail(ErrorCode::kInvalidInput, "train_model: input logs are not deduplicated");
    for (std::size_t k = 0; k < idx.size(); ++k)
      result.leaf_of_input[idx[k]] = base + tree.leaf_of_log[k];
  }
  if (capped) log_warn("training: " + std::to_string(capped) + " node(s) hit the depth cap");
  return result;
}

}  // namespace satlog
