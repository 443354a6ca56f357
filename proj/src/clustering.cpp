#include "satlog/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "satlog/error.hpp"
#include "satlog/preprocess.hpp"

namespace satlog {

namespace {

using LogRefs = std::vector<const EncodedLog*>;

LogRefs refs_of(std::span<const EncodedLog> logs) {
  LogRefs out;
  out.reserve(logs.size());
  for (const auto& l : logs) out.push_back(&l);
  return out;
}

void require_uniform_length(std::span<const EncodedLog* const> logs) {
  if (logs.empty()) return;
  const std::size_t m = logs.front()->size();
  for (const EncodedLog* l : logs) {
    if (l->size() != m) fail(ErrorCode::kInternal, "cluster logs differ in token length");
    if (l->tokens.size() != l->hashes.size())
      fail(ErrorCode::kInternal, "encoded log has mismatched token and hash counts");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ClusterStats

ClusterStats ClusterStats::build_unique(std::span<const EncodedLog* const> logs) {
  require_uniform_length(logs);
  ClusterStats s;
  if (logs.empty()) return s;
  const std::size_t m = logs.front()->size();
  s.positions_.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    s.positions_[i].text = logs.front()->tokens[i];
    s.positions_[i].freq.reserve(std::min<std::size_t>(logs.size(), 16));
  }
  for (const EncodedLog* l : logs) {
    s.total_ += l->count;
    for (std::size_t i = 0; i < m; ++i) s.positions_[i].freq[l->hashes[i]] += l->count;
  }
  s.unique_ = logs.size();
  s.finish();
  return s;
}

ClusterStats ClusterStats::build(std::span<const EncodedLog> logs) {
  LogRefs refs = refs_of(logs);
  ClusterStats s = build_unique(refs);
  std::unordered_set<std::vector<TokenHash>, HashVectorHasher> distinct;
  for (const auto& l : logs) distinct.insert(l.hashes);
  s.unique_ = distinct.size();
  return s;
}

void ClusterStats::finish() {
  weights_.resize(positions_.size());
  weight_sum_ = 0.0;
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const std::size_t n = positions_[i].freq.size();
    weights_[i] = n <= 1 ? 2.0 : 1.0 / static_cast<double>(n - 1);
    weight_sum_ += weights_[i];
  }
}

std::uint64_t ClusterStats::frequency(std::size_t pos, TokenHash h) const noexcept {
  const auto& f = positions_[pos].freq;
  auto it = f.find(h);
  return it == f.end() ? 0 : it->second;
}

double ClusterStats::weight(std::size_t pos) const noexcept { return weights_[pos]; }

PositionClass ClusterStats::position_class(std::size_t pos) const noexcept {
  const std::size_t n = distinct(pos);
  if (n == 1) return PositionClass::kConstant;
  if (n == unique_ && unique_ >= 3) return PositionClass::kFullyVariable;
  return PositionClass::kUnresolved;
}

std::vector<PositionClass> classify(const ClusterStats& stats) {
  std::vector<PositionClass> out(stats.positions());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stats.position_class(i);
  return out;
}

// ---------------------------------------------------------------------------
// Similarity and saturation

double positional_similarity(std::span<const TokenHash> hashes, const ClusterStats& stats) {
  if (hashes.size() != stats.positions())
    fail(ErrorCode::kInvalidInput, "positional_similarity: length mismatch");
  if (stats.total() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < hashes.size(); ++i) {
    std::uint64_t f = stats.frequency(i, hashes[i]);
    if (f) acc += stats.weight(i) * static_cast<double>(f);
  }
  return acc / (static_cast<double>(stats.total()) * stats.weight_sum());
}

double positional_similarity(const EncodedLog& log, const ClusterStats& stats) {
  return positional_similarity(std::span<const TokenHash>(log.hashes), stats);
}

double saturation(const ClusterStats& stats) {
  const std::size_t m = stats.positions();
  if (m == 0) return 1.0;
  std::size_t resolved = 0;
  double f_v = 1.0;
  const double log_n = std::log(static_cast<double>(stats.total()));
  for (std::size_t i = 0; i < m; ++i) {
    if (stats.position_class(i) != PositionClass::kUnresolved) {
      ++resolved;
      continue;
    }
    double v = log_n > 0.0
                   ? (std::log(static_cast<double>(stats.distinct(i))) - 1.0) / log_n
                   : 0.0;
    f_v = std::min(f_v, std::clamp(v, 0.0, 1.0));
  }
  const double f_c = static_cast<double>(resolved) / static_cast<double>(m);
  if (resolved == m) return f_c;
  const std::size_t unresolved = m - resolved;
  const double p_c = std::ldexp(1.0, -static_cast<int>(unresolved - 1));
  return (f_v * p_c + (1.0 - p_c)) * f_c;
}

Template template_of(const ClusterStats& stats) {
  Template t;
  t.cells.reserve(stats.positions());
  for (std::size_t i = 0; i < stats.positions(); ++i) {
    if (stats.distinct(i) == 1) {
      t.cells.push_back(Cell::literal(stats.representative(i)));
    } else {
      t.cells.push_back(Cell::wildcard());
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Early stop

namespace {

Partition singletons(std::size_t n) {
  Partition p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = {i};
  return p;
}

std::optional<Partition> early_stop_refs(const ClusterStats& stats, const LogRefs& logs) {
  const std::size_t u = logs.size();
  if (u <= 2) return singletons(u);

  std::size_t unresolved = 0;
  std::size_t unresolved_pos = 0;
  bool all_varying_distinct = true;
  for (std::size_t i = 0; i < stats.positions(); ++i) {
    const std::size_t n = stats.distinct(i);
    if (n > 1 && n != u) all_varying_distinct = false;
    if (stats.position_class(i) == PositionClass::kUnresolved) {
      ++unresolved;
      unresolved_pos = i;
    }
  }
  // Every varying position differs in every log.
  if (all_varying_distinct) return singletons(u);

  // A single unresolved position ends clustering only when no subset of three
  // or more logs could still resolve: at most two values, each carried by at
  // most two logs. Otherwise splitting on that position does raise
  // saturation and cluster_once must run.
  if (unresolved == 1 && stats.distinct(unresolved_pos) <= 2) {
    std::unordered_map<TokenHash, std::size_t> class_size;
    for (const EncodedLog* l : logs) ++class_size[l->hashes[unresolved_pos]];
    bool small = std::all_of(class_size.begin(), class_size.end(),
                             [](const auto& kv) { return kv.second <= 2; });
    if (small) return singletons(u);
  }
  return std::nullopt;
}

}  // namespace

std::optional<Partition> early_stop(const ClusterStats& stats,
                                    std::span<const EncodedLog> logs) {
  return early_stop_refs(stats, refs_of(logs));
}

// ---------------------------------------------------------------------------
// Single clustering process

namespace {

struct Refinement {
  std::vector<ClusterStats> stats;
  std::vector<std::vector<std::size_t>> members;
};

ClusterStats stats_of(const LogRefs& logs, const std::vector<std::size_t>& idx) {
  LogRefs sub;
  sub.reserve(idx.size());
  for (std::size_t i : idx) sub.push_back(logs[i]);
  return ClusterStats::build_unique(sub);
}

// Assigns every log to its most similar centroid; ties are broken uniformly
// at random so tied logs spread evenly across clusters.
std::vector<std::size_t> assign(const LogRefs& logs, const std::vector<ClusterStats>& centroids,
                                std::mt19937_64& rng) {
  std::vector<std::size_t> out(logs.size());
  std::vector<std::size_t> best;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    double best_sim = -1.0;
    best.clear();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      double s = positional_similarity(logs[i]->hashes, centroids[c]);
      if (s > best_sim + 1e-12) {
        best_sim = s;
        best.assign(1, c);
      } else if (s >= best_sim - 1e-12) {
        best.push_back(c);
      }
    }
    if (best.size() == 1) {
      out[i] = best.front();
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, best.size() - 1);
      out[i] = best[pick(rng)];
    }
  }
  return out;
}

Refinement refine(const LogRefs& logs, std::vector<ClusterStats> centroids,
                  std::mt19937_64& rng, std::size_t max_iterations) {
  Refinement r;
  std::vector<std::size_t> assignment;
  for (std::size_t iter = 0; iter < std::max<std::size_t>(1, max_iterations); ++iter) {
    std::vector<std::size_t> next = assign(logs, centroids, rng);
    const bool changed = next != assignment;
    assignment = std::move(next);

    std::vector<std::vector<std::size_t>> members(centroids.size());
    for (std::size_t i = 0; i < assignment.size(); ++i) members[assignment[i]].push_back(i);
    r.members.clear();
    for (auto& m : members)
      if (!m.empty()) r.members.push_back(std::move(m));
    // Remap assignment onto the surviving clusters.
    for (std::size_t c = 0; c < r.members.size(); ++c)
      for (std::size_t i : r.members[c]) assignment[i] = c;
    centroids.clear();
    for (const auto& m : r.members) centroids.push_back(stats_of(logs, m));
    if (!changed) break;
  }
  r.stats = std::move(centroids);
  return r;
}

struct Round {
  std::vector<std::vector<std::size_t>> members;
  std::vector<bool> improved;
};

std::size_t resolved_positions(const ClusterStats& stats) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < stats.positions(); ++i)
    n += stats.position_class(i) != PositionClass::kUnresolved;
  return n;
}

// A cluster improves on its parent when it classifies more positions as
// constant or variable and its saturation is strictly higher. Dropping logs
// alone can nudge saturation up without resolving anything; that does not
// count.
struct ParentScore {
  double saturation;
  std::size_t resolved;
  bool improved_by(const ClusterStats& stats) const {
    return satlog::saturation(stats) > saturation && resolved_positions(stats) > resolved;
  }
};

// Seeds and refines clusters until all of them improve or the cluster budget
// runs out. Needs at least three logs.
Round split_round(const LogRefs& logs, const ParentScore& parent, std::mt19937_64& rng,
                  const ClusteringLimits& limits) {
  const std::size_t u = logs.size();
  const std::size_t m = logs.front()->size();
  const std::size_t max_k =
      std::min(u, std::max<std::size_t>(3, limits.cluster_factor * std::max<std::size_t>(m, 1)));

  std::uniform_int_distribution<std::size_t> pick(0, u - 1);
  const std::size_t first = pick(rng);
  ClusterStats first_stats = stats_of(logs, {first});
  std::size_t second = first;
  double farthest = -1.0;
  for (std::size_t i = 0; i < u; ++i) {
    if (i == first) continue;
    double d = 1.0 - positional_similarity(logs[i]->hashes, first_stats);
    if (d > farthest) {
      farthest = d;
      second = i;
    }
  }

  // Every round restarts refinement from single-log seeds, so a new seed
  // never competes against the statistics of an established cluster.
  std::vector<std::size_t> seeds{first, second};
  Refinement r;
  std::vector<bool> improved;
  while (true) {
    std::vector<ClusterStats> centroids;
    centroids.reserve(seeds.size());
    for (std::size_t s : seeds) centroids.push_back(stats_of(logs, {s}));
    r = refine(logs, std::move(centroids), rng, limits.max_refine_iterations);
    improved.assign(r.stats.size(), false);
    std::size_t failing = 0;
    for (std::size_t c = 0; c < r.stats.size(); ++c) {
      improved[c] = parent.improved_by(r.stats[c]);
      failing += improved[c] ? 0 : 1;
    }
    if (failing == 0 && r.members.size() >= 2) break;
    if (seeds.size() >= max_k) break;

    // One new seed per failing cluster, each at the log farthest from every
    // cluster and seed chosen so far.
    std::vector<double> nearest(u, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < u; ++i)
      for (const auto& s : r.stats)
        nearest[i] = std::min(nearest[i], 1.0 - positional_similarity(logs[i]->hashes, s));
    for (std::size_t s : seeds) nearest[s] = 0.0;
    const std::size_t add = std::min(failing, max_k - seeds.size());
    std::size_t added = 0;
    for (std::size_t a = 0; a < add; ++a) {
      std::size_t seed = u;
      double best = 0.0;
      for (std::size_t i = 0; i < u; ++i) {
        if (nearest[i] > best) {
          best = nearest[i];
          seed = i;
        }
      }
      if (seed == u) break;
      seeds.push_back(seed);
      ++added;
      const ClusterStats seed_stats = stats_of(logs, {seed});
      for (std::size_t i = 0; i < u; ++i)
        nearest[i] =
            std::min(nearest[i], 1.0 - positional_similarity(logs[i]->hashes, seed_stats));
    }
    if (added == 0) break;  // no log is off every centroid
  }

  return {std::move(r.members), std::move(improved)};
}

// Groups `subset` by its tokens at the unresolved position with the fewest
// distinct values (lowest index on ties), in first-seen order. Needs a subset
// with an unresolved position, which any subset below saturation 1 has.
std::vector<std::vector<std::size_t>> split_by_value(const LogRefs& logs,
                                                     const std::vector<std::size_t>& subset) {
  const ClusterStats stats = stats_of(logs, subset);
  std::size_t pos = stats.positions();
  for (std::size_t i = 0; i < stats.positions(); ++i) {
    if (stats.position_class(i) != PositionClass::kUnresolved) continue;
    if (pos == stats.positions() || stats.distinct(i) < stats.distinct(pos)) pos = i;
  }
  if (pos == stats.positions())
    fail(ErrorCode::kInternal, "split_by_value: subset has no unresolved position");
  std::vector<std::vector<std::size_t>> parts;
  std::unordered_map<TokenHash, std::size_t> slot;
  for (std::size_t i : subset) {
    auto [it, fresh] = slot.try_emplace(logs[i]->hashes[pos], parts.size());
    if (fresh) parts.emplace_back();
    parts[it->second].push_back(i);
  }
  return parts;
}

Partition cluster_once_refs(const LogRefs& logs, double parent_saturation,
                            std::mt19937_64& rng, const ClusteringLimits& limits) {
  const std::size_t u = logs.size();
  if (u <= 2) return singletons(u);
  // A cluster that still fails once the budget is spent is split again on
  // its own, against the same parent saturation. When refinement collapses a
  // subset into one cluster, the subset is split by the tokens of its
  // unresolved position with the fewest distinct values instead. Subsets
  // strictly shrink and parts of at most two logs become single logs
  // (saturation 1), so every returned part beats the parent.
  const ParentScore parent{parent_saturation, resolved_positions(ClusterStats::build_unique(logs))};
  Partition out;
  std::vector<std::vector<std::size_t>> work;
  work.emplace_back(u);
  for (std::size_t i = 0; i < u; ++i) work.back()[i] = i;
  while (!work.empty()) {
    std::vector<std::size_t> subset = std::move(work.back());
    work.pop_back();
    if (subset.size() <= 2) {
      for (std::size_t i : subset) out.push_back({i});
      continue;
    }
    LogRefs sub;
    sub.reserve(subset.size());
    for (std::size_t i : subset) sub.push_back(logs[i]);
    Round round = split_round(sub, parent, rng, limits);
    std::vector<std::vector<std::size_t>> retry;
    for (std::size_t c = 0; c < round.members.size(); ++c) {
      std::vector<std::size_t> part;
      part.reserve(round.members[c].size());
      for (std::size_t k : round.members[c]) part.push_back(subset[k]);
      if (round.improved[c] && part.size() < u) {
        out.push_back(std::move(part));
      } else if (part.size() < subset.size()) {
        retry.push_back(std::move(part));
      } else {
        for (auto& piece : split_by_value(logs, part)) {
          if (piece.size() <= 2) {
            for (std::size_t i : piece) out.push_back({i});
          } else if (parent.improved_by(stats_of(logs, piece))) {
            out.push_back(std::move(piece));
          } else {
            retry.push_back(std::move(piece));
          }
        }
      }
    }
    // Reversed so the first failing cluster is split next.
    for (auto it = retry.rbegin(); it != retry.rend(); ++it) work.push_back(std::move(*it));
  }
  return out;
}

}  // namespace

Partition cluster_once(std::span<const EncodedLog> logs, double parent_saturation,
                       std::mt19937_64& rng, const ClusteringLimits& limits) {
  LogRefs refs = refs_of(logs);
  require_uniform_length(refs);
  return cluster_once_refs(refs, parent_saturation, rng, limits);
}

// ---------------------------------------------------------------------------
// Tree builder

Tree build_tree(std::vector<EncodedLog> group_logs, std::mt19937_64& rng,
                const ClusteringLimits& limits) {
  if (group_logs.empty()) fail(ErrorCode::kInvalidInput, "build_tree: empty group");
  Tree tree;
  tree.logs = deduplicate(std::move(group_logs));
  const LogRefs all = refs_of(tree.logs);
  require_uniform_length(all);
  const std::size_t m = tree.logs.front().size();
  const std::size_t depth_cap = std::max<std::size_t>(1, limits.depth_factor * m);
  tree.leaf_of_log.assign(tree.logs.size(), 0);

  struct Pending {
    std::size_t node;
    std::vector<std::size_t> members;  // indices into tree.logs
    ClusterStats stats;
    std::size_t depth;
  };

  std::vector<std::size_t> root_members(tree.logs.size());
  for (std::size_t i = 0; i < root_members.size(); ++i) root_members[i] = i;
  ClusterStats root_stats = ClusterStats::build_unique(all);
  TreeNode root;
  root.tmpl = template_of(root_stats);
  root.saturation = saturation(root_stats);
  root.log_count = root_stats.total();
  tree.nodes.push_back(std::move(root));

  std::vector<Pending> stack;
  stack.push_back({0, std::move(root_members), std::move(root_stats), 0});
  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    const double s = tree.nodes[cur.node].saturation;
    const bool resolved = s >= 1.0 || cur.members.size() <= 1;
    if (resolved || cur.depth >= depth_cap) {
      tree.nodes[cur.node].depth_capped = !resolved;
      for (std::size_t i : cur.members) tree.leaf_of_log[i] = cur.node;
      continue;
    }
    LogRefs sub;
    sub.reserve(cur.members.size());
    for (std::size_t i : cur.members) sub.push_back(all[i]);

    Partition parts;
    if (auto terminal = early_stop_refs(cur.stats, sub)) {
      parts = std::move(*terminal);
    } else {
      parts = cluster_once_refs(sub, s, rng, limits);
    }

    // Children are pushed in reverse so they are expanded in partition order.
    std::vector<Pending> children;
    for (const auto& part : parts) {
      std::vector<std::size_t> members;
      members.reserve(part.size());
      for (std::size_t k : part) members.push_back(cur.members[k]);
      ClusterStats cs = stats_of(all, members);
      TreeNode child;
      child.parent = cur.node;
      child.tmpl = template_of(cs);
      child.saturation = saturation(cs);
      child.log_count = cs.total();
      const std::size_t idx = tree.nodes.size();
      tree.nodes.push_back(std::move(child));
      tree.nodes[cur.node].children.push_back(idx);
      children.push_back({idx, std::move(members), std::move(cs), cur.depth + 1});
    }
    for (auto it = children.rbegin(); it != children.rend(); ++it)
      stack.push_back(std::move(*it));
  }
  return tree;
}

}  // namespace satlog
