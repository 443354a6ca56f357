#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace satlog {

using TokenHash = std::uint64_t;
using NodeId = std::uint64_t;

// Hash reserved for the wildcard cell. token_hash() never returns it.
inline constexpr TokenHash kWildcardHash = 0;
inline constexpr std::string_view kWildcardText = "*";

// Identifier written into every model header. Bump the suffix whenever
// token_hash() changes, so stale models are refused instead of mismatching.
inline constexpr std::string_view kHashFunctionId = "fnv1a64-splitmix64/1";

/// Seedless 64-bit token hash: FNV-1a over the bytes followed by the
/// splitmix64 finalizer. Throws kInvalidInput on an empty token or on the
/// wildcard literal "*".
TokenHash token_hash(std::string_view token);

/// Same function without the precondition checks; "*" still maps to 0.
TokenHash token_hash_or_wildcard(std::string_view token) noexcept;

/// Hash over an arbitrary byte string (config fingerprints, vector keys).
std::uint64_t bytes_hash(std::string_view bytes) noexcept;

std::uint64_t mix64(std::uint64_t x) noexcept;

using TokenSequence = std::vector<std::string>;

struct EncodedLog {
  std::vector<TokenHash> hashes;
  std::vector<std::string> tokens;
  std::uint64_t count = 1;

  std::size_t size() const noexcept { return hashes.size(); }
};

// Hashing a whole hash vector, for dedup tables.
struct HashVectorHasher {
  std::size_t operator()(const std::vector<TokenHash>& v) const noexcept;
};

struct Cell {
  TokenHash hash = kWildcardHash;
  std::string text;  // empty for wildcards

  static Cell wildcard() { return {}; }
  static Cell literal(std::string text);

  bool is_wildcard() const noexcept { return hash == kWildcardHash; }
  bool operator==(const Cell&) const = default;
};

struct Template {
  std::vector<Cell> cells;

  std::size_t size() const noexcept { return cells.size(); }
  std::size_t wildcard_count() const noexcept;
  bool matches(const std::vector<TokenHash>& hashes) const noexcept;
  // Space-joined cells, wildcards printed as "*" (no run collapsing).
  std::string raw_text() const;

  bool operator==(const Template&) const = default;
};

struct GroupKey {
  std::uint32_t length = 0;
  std::vector<TokenHash> prefix;

  auto operator<=>(const GroupKey&) const = default;
  bool operator==(const GroupKey&) const = default;
};

struct ClusterNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  Template tmpl;
  double saturation = 0.0;
  std::uint64_t log_count = 0;
  GroupKey group_key;
  // Inserted online for an unmatched log; absorbed at the next training.
  bool temporary = false;
};

struct VariablePatternSpec {
  std::string pattern;
  std::string label;

  bool operator==(const VariablePatternSpec&) const = default;
};

struct TopicConfig {
  std::string tokenizer_pattern;  // empty selects the built-in default rule
  std::vector<VariablePatternSpec> variable_patterns;
  std::uint32_t prefix_k = 0;
  std::uint64_t training_volume_threshold = 100'000;
  std::uint64_t initial_training_volume = 10'000;
  std::chrono::seconds training_interval{15 * 60};
  std::uint64_t sample_cap = 1'000'000;
  double merge_similarity_threshold = 0.9;
  std::uint64_t rng_seed = 20250101;
  // When set, the match index holds the nodes resolved at this saturation
  // instead of the most precise ones.
  std::optional<double> index_threshold;

  bool operator==(const TopicConfig&) const = default;
};

struct ParseModel {
  std::string topic;
  std::uint64_t version = 0;
  std::map<NodeId, ClusterNode> nodes;
  std::map<GroupKey, NodeId> roots;
  std::uint64_t config_fingerprint = 0;
  std::string hash_function_id{kHashFunctionId};
  std::int64_t trained_at = 0;  // unix seconds
  TopicConfig config;

  NodeId next_id() const noexcept {
    return nodes.empty() ? 1 : nodes.rbegin()->first + 1;
  }
  const ClusterNode& node(NodeId id) const;
  ClusterNode& node(NodeId id);
  bool contains(NodeId id) const noexcept { return nodes.count(id) != 0; }
};

}  // namespace satlog
