#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "satlog/types.hpp"

namespace satlog {

inline constexpr int kModelFormatVersion = 1;

/// 0 when lengths differ; otherwise the share of positions whose cells are
/// compatible (equal literals, or a wildcard on either side).
double template_similarity(const Template& a, const Template& b);

/// Position-wise intersection: literals kept where both agree, wildcard
/// elsewhere. Lengths must match.
Template intersect_templates(const Template& a, const Template& b);

/// Literals joined by single spaces, each run of wildcards shown as one "*".
std::string display_template(const Template& t);

/// Highest ancestor-or-self whose saturation meets `threshold`; the node
/// itself when even it falls short. Throws kNotFound for unknown ids.
NodeId ancestor_at_threshold(const ParseModel& model, NodeId node, double threshold);

/// The node followed by its ancestors up to the root.
std::vector<NodeId> ancestor_chain(const ParseModel& model, NodeId node);

std::vector<NodeId> leaves(const ParseModel& model);

/// Folds a freshly trained model into the previous one; see model.cpp for
/// the matching rules. Throws kIncompatibleModel on topic, config or hash
/// function mismatch. Temporary nodes of `previous` are dropped first.
ParseModel merge_models(const ParseModel& previous, const ParseModel& fresh,
                        double threshold);

/// Removes online-inserted temporary nodes (and roots left with no trained
/// content), fixing up ancestor counts.
void drop_temporary_nodes(ParseModel& model);

/// Throws kCorruptModel describing the first violated forest invariant.
void validate_model(const ParseModel& model);

/// Same forest shape, templates, saturations and group keys, ignoring node
/// ids, counts and version metadata.
bool structurally_equal(const ParseModel& a, const ParseModel& b);

std::string serialize_model(const ParseModel& model);
/// Throws kParse on malformed text, kCorruptModel on invariant violations and
/// kIncompatibleModel on an unknown hash function or format version.
ParseModel deserialize_model(std::string_view text);

void save_model(const ParseModel& model, const std::string& path);
ParseModel load_model(const std::string& path);

struct TemplateRow {
  NodeId node_id = 0;
  std::string display_text;
  double saturation = 0.0;
  std::uint64_t log_count = 0;
};

/// Resolves each counted node to its ancestor at `threshold` and sums the
/// counts per resolved node, largest first. Throws kInvalidInput for a
/// threshold outside [0,1].
std::vector<TemplateRow> resolve_templates(
    const ParseModel& model, const std::unordered_map<NodeId, std::uint64_t>& counts,
    double threshold);

/// resolve_templates over the training counts held by the leaves.
std::vector<TemplateRow> query_model(const ParseModel& model, double threshold);

}  // namespace satlog
