#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "satlog/types.hpp"

namespace satlog {

struct MatchResult {
  NodeId node_id = 0;
  double saturation = 0.0;
  bool matched = false;  // false: a temporary node was created for the log

  bool operator==(const MatchResult&) const = default;
};

struct GroupKeyHasher {
  std::size_t operator()(const GroupKey& key) const noexcept;
};

// Candidate templates per GroupKey in scan order: saturation descending,
// wildcard count ascending, node id ascending.
class MatchIndex {
 public:
  struct Entry {
    NodeId id = 0;
    double saturation = 0.0;
    std::size_t wildcards = 0;
    std::vector<TokenHash> cells;  // kWildcardHash marks a wildcard
  };

  MatchIndex() = default;

  /// Indexes the leaves, or with `tier` set the distinct nodes the leaves
  /// resolve to at that saturation threshold. Temporary nodes are always
  /// indexed.
  static MatchIndex build(const ParseModel& model, std::optional<double> tier = std::nullopt);

  std::optional<MatchResult> match(std::span<const TokenHash> hashes) const;

  void insert(const ClusterNode& node);
  // All candidates of a group in scan order.
  std::vector<Entry> candidates(const GroupKey& key) const;
  std::uint32_t prefix_k() const noexcept { return prefix_k_; }
  std::size_t size() const noexcept { return size_; }

 private:
  // Wildcard-free templates of saturation 1 lead the scan order and match
  // only their own hash vector, so they sit in a hash table; the rest are
  // scanned in order.
  struct Group {
    std::unordered_map<std::vector<TokenHash>, Entry, HashVectorHasher> exact;
    std::vector<Entry> scan;
  };
  void add(Group& g, Entry e, bool keep_sorted);

  std::unordered_map<GroupKey, Group, GroupKeyHasher> groups_;
  std::uint32_t prefix_k_ = 0;
  std::size_t size_ = 0;
};

inline MatchIndex rebuild_index(const ParseModel& model) {
  return MatchIndex::build(model, model.config.index_threshold);
}

/// First candidate of the log's group in index order whose cells all match.
std::optional<MatchResult> match(std::span<const TokenHash> hashes, const MatchIndex& index);

/// Inserts `hashes`/`tokens` as a temporary leaf with saturation 1 under the
/// root of its group, creating an all-wildcard root of saturation 0 when the
/// group is new (or when the existing root is a leaf and cannot host a
/// child). Returns the new node id.
NodeId insert_temporary(ParseModel& model, std::span<const TokenHash> hashes,
                        std::span<const std::string_view> tokens);

struct Snapshot {
  std::shared_ptr<const ParseModel> model;
  std::shared_ptr<const MatchIndex> index;
};

// Owns the current snapshot. Readers copy the snapshot pointers and never
// see a half-built model; all insertions go through one writer at a time.
class Matcher {
 public:
  explicit Matcher(ParseModel model);

  std::shared_ptr<const Snapshot> snapshot() const;
  void publish(ParseModel model);

  std::optional<MatchResult> match(std::span<const TokenHash> hashes) const;

  struct Item {
    std::span<const TokenHash> hashes;
    std::span<const std::string_view> tokens;
  };
  /// Matches each item; the misses are inserted as temporary nodes in one
  /// new snapshot. Identical misses in a batch share a single node.
  std::vector<MatchResult> match_or_insert(std::span<const Item> items);

 private:
  mutable std::mutex snapshot_mu_;
  std::mutex writer_mu_;
  std::shared_ptr<const Snapshot> snapshot_;
};

}  // namespace satlog
