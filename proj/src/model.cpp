#include "satlog/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "satlog/config.hpp"
#include "satlog/error.hpp"

namespace satlog {

using nlohmann::json;

double template_similarity(const Template& a, const Template& b) {
  if (a.size() != b.size()) return 0.0;
  if (a.size() == 0) return 1.0;
  std::size_t compatible = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Cell& x = a.cells[i];
    const Cell& y = b.cells[i];
    if (x.is_wildcard() || y.is_wildcard() || x.hash == y.hash) ++compatible;
  }
  return static_cast<double>(compatible) / static_cast<double>(a.size());
}

Template intersect_templates(const Template& a, const Template& b) {
  if (a.size() != b.size())
    fail(ErrorCode::kInvalidInput, "intersect_templates: length mismatch");
  Template out;
  out.cells.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Cell& x = a.cells[i];
    const Cell& y = b.cells[i];
    out.cells.push_back(!x.is_wildcard() && x.hash == y.hash ? x : Cell::wildcard());
  }
  return out;
}

std::string display_template(const Template& t) {
  std::string out;
  bool prev_wildcard = false;
  for (const Cell& c : t.cells) {
    if (c.is_wildcard() && prev_wildcard) continue;
    if (!out.empty()) out += ' ';
    out += c.is_wildcard() ? std::string(kWildcardText) : c.text;
    prev_wildcard = c.is_wildcard();
  }
  return out;
}

NodeId ancestor_at_threshold(const ParseModel& model, NodeId node, double threshold) {
  const ClusterNode* cur = &model.node(node);
  while (cur->parent) {
    const ClusterNode& parent = model.node(*cur->parent);
    if (parent.saturation < threshold) break;
    cur = &parent;
  }
  // Saturation strictly grows with depth, so the walk stops at the highest
  // qualifying ancestor; when the start node itself falls short it is
  // returned unchanged.
  return cur->id;
}

std::vector<NodeId> ancestor_chain(const ParseModel& model, NodeId node) {
  std::vector<NodeId> out;
  const ClusterNode* cur = &model.node(node);
  out.push_back(cur->id);
  while (cur->parent) {
    cur = &model.node(*cur->parent);
    out.push_back(cur->id);
    if (out.size() > model.nodes.size())
      fail(ErrorCode::kCorruptModel, "cycle through node " + std::to_string(node));
  }
  return out;
}

std::vector<NodeId> leaves(const ParseModel& model) {
  std::vector<NodeId> out;
  for (const auto& [id, n] : model.nodes)
    if (n.children.empty()) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------
// Temporary nodes

namespace {

void remove_child(ClusterNode& parent, NodeId child) {
  auto& c = parent.children;
  c.erase(std::remove(c.begin(), c.end(), child), c.end());
}

void subtract_count_upward(ParseModel& model, std::optional<NodeId> from, std::uint64_t n) {
  while (from) {
    ClusterNode& a = model.node(*from);
    a.log_count -= std::min(a.log_count, n);
    from = a.parent;
  }
}

}  // namespace

void drop_temporary_nodes(ParseModel& model) {
  // Temporary leaves first, then the scaffolding nodes that hosted them.
  std::vector<NodeId> temp_leaves;
  for (const auto& [id, n] : model.nodes)
    if (n.temporary && n.children.empty()) temp_leaves.push_back(id);
  for (NodeId id : temp_leaves) {
    ClusterNode node = model.node(id);
    subtract_count_upward(model, node.parent, node.log_count);
    if (node.parent) remove_child(model.node(*node.parent), id);
    if (!node.parent) model.roots.erase(node.group_key);
    model.nodes.erase(id);
  }

  std::vector<NodeId> scaffolding;
  for (const auto& [id, n] : model.nodes)
    if (n.temporary) scaffolding.push_back(id);
  // Deepest first so nested scaffolding unwinds cleanly.
  std::sort(scaffolding.rbegin(), scaffolding.rend());
  for (NodeId id : scaffolding) {
    ClusterNode& node = model.node(id);
    if (node.children.size() >= 2) {
      node.temporary = false;
      continue;
    }
    if (node.children.empty()) {
      if (node.parent) {
        remove_child(model.node(*node.parent), id);
      } else {
        model.roots.erase(node.group_key);
      }
      model.nodes.erase(id);
      continue;
    }
    // Exactly one child: splice it into this node's place.
    const NodeId child = node.children.front();
    const std::optional<NodeId> parent = node.parent;
    model.node(child).parent = parent;
    if (parent) {
      auto& siblings = model.node(*parent).children;
      std::replace(siblings.begin(), siblings.end(), id, child);
      std::sort(siblings.begin(), siblings.end());
    } else {
      model.roots[node.group_key] = child;
    }
    model.nodes.erase(id);
  }
}

// ---------------------------------------------------------------------------
// Merge

namespace {

void check_compatible(const ParseModel& a, const ParseModel& b) {
  if (a.topic != b.topic)
    fail(ErrorCode::kIncompatibleModel,
         "cannot merge models of topics '" + a.topic + "' and '" + b.topic + "'");
  if (a.config_fingerprint != b.config_fingerprint)
    fail(ErrorCode::kIncompatibleModel, "cannot merge models with different configs");
  if (a.hash_function_id != b.hash_function_id)
    fail(ErrorCode::kIncompatibleModel, "cannot merge models with different hash functions");
}

std::size_t equal_cells(const Template& a, const Template& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    n += a.cells[i] == b.cells[i] ? 1 : 0;
  return n;
}

}  // namespace

// Roots sharing a GroupKey always merge. Every other fresh node, visited
// parents first, looks for a partner among the previous model's children of
// the node its own parent was folded into: the partner must have template
// similarity >= threshold and the same leaf/internal role (so child counts
// keep summing to the parent's). Best partner = highest similarity, then
// most identical cells, then closest saturation, then lowest id. A merged node sums counts,
// intersects templates and keeps the smaller saturation. Unpartnered fresh
// nodes are attached as new children of that same node.
ParseModel merge_models(const ParseModel& previous, const ParseModel& fresh,
                        double threshold) {
  check_compatible(previous, fresh);
  ParseModel out = previous;
  drop_temporary_nodes(out);
  const NodeId first_new = std::max(out.next_id(), previous.next_id());
  NodeId next_id = first_new;

  auto fold = [](ClusterNode& into, const ClusterNode& from) {
    into.log_count += from.log_count;
    into.tmpl = intersect_templates(into.tmpl, from.tmpl);
    into.saturation = std::min(into.saturation, from.saturation);
  };

  auto new_root_above = [&](NodeId old_root, const ClusterNode& fr, double saturation) {
    ClusterNode root;
    root.id = next_id++;
    root.tmpl = intersect_templates(out.node(old_root).tmpl, fr.tmpl);
    root.saturation = saturation;
    root.log_count = out.node(old_root).log_count + fr.log_count;
    root.group_key = fr.group_key;
    root.children.push_back(old_root);
    out.node(old_root).parent = root.id;
    out.roots[fr.group_key] = root.id;
    const NodeId id = root.id;
    out.nodes.emplace(id, std::move(root));
    return id;
  };

  // A previous node absorbs at most one fresh node, so siblings with equal
  // templates pair up one to one.
  std::unordered_set<NodeId> taken;
  for (const auto& [key, fresh_root] : fresh.roots) {
    std::deque<std::pair<NodeId, NodeId>> queue;  // fresh node, host in `out`
    auto existing = out.roots.find(key);
    const ClusterNode& fr = fresh.node(fresh_root);
    auto enqueue_children = [&](const ClusterNode& f, NodeId host) {
      for (NodeId c : f.children) queue.emplace_back(c, host);
    };

    if (existing == out.roots.end()) {
      ClusterNode copy = fr;
      copy.id = next_id++;
      copy.children.clear();
      copy.parent.reset();
      out.roots[key] = copy.id;
      enqueue_children(fr, copy.id);
      out.nodes.emplace(copy.id, std::move(copy));
    } else {
      const NodeId prev_root = existing->second;
      ClusterNode& pr = out.node(prev_root);
      const bool prev_leaf = pr.children.empty();
      const bool fresh_leaf = fr.children.empty();
      if (prev_leaf == fresh_leaf) {
        fold(pr, fr);
        enqueue_children(fr, prev_root);
      } else if (prev_leaf) {
        // A previous single-leaf group now has a tree: the leaf keeps its
        // id and becomes a candidate under a root strictly below it.
        if (pr.saturation <= 0.0) {
          fold(pr, fr);  // a fully variable leaf already covers the tree
          continue;
        }
        const double sat = fr.saturation < pr.saturation
                               ? fr.saturation
                               : std::nextafter(pr.saturation, 0.0);
        enqueue_children(fr, new_root_above(prev_root, fr, sat));
      } else if (fr.saturation > pr.saturation) {
        // A fresh single leaf competes with the previous root's children.
        pr.log_count += fr.log_count;
        pr.tmpl = intersect_templates(pr.tmpl, fr.tmpl);
        queue.emplace_back(fr.id, prev_root);
      } else if (fr.saturation > 0.0) {
        const NodeId host =
            new_root_above(prev_root, fr, std::nextafter(fr.saturation, 0.0));
        queue.emplace_back(fr.id, host);
      } else {
        // Fully variable fresh leaf: its logs join the heaviest path.
        NodeId cur = prev_root;
        while (true) {
          ClusterNode& n = out.node(cur);
          n.log_count += fr.log_count;
          if (n.children.empty()) {
            n.tmpl = intersect_templates(n.tmpl, fr.tmpl);
            break;
          }
          cur = *std::max_element(n.children.begin(), n.children.end(),
                                  [&](NodeId x, NodeId y) {
                                    return out.node(x).log_count < out.node(y).log_count;
                                  });
        }
      }
    }

    while (!queue.empty()) {
      const auto [fid, host] = queue.front();
      queue.pop_front();
      const ClusterNode& f = fresh.node(fid);
      const bool f_leaf = f.children.empty();

      NodeId partner = 0;
      double best_sim = -1.0;
      std::size_t best_eq = 0;
      double best_gap = 0.0;
      for (NodeId cand : out.node(host).children) {
        if (cand >= first_new || taken.count(cand)) continue;
        const ClusterNode& x = out.node(cand);
        if (x.children.empty() != f_leaf) continue;
        if (!(x.saturation > out.node(host).saturation)) continue;
        double sim = template_similarity(x.tmpl, f.tmpl);
        if (sim < threshold) continue;
        std::size_t eq = equal_cells(x.tmpl, f.tmpl);
        double gap = std::abs(x.saturation - f.saturation);
        if (sim > best_sim || (sim == best_sim && eq > best_eq) ||
            (sim == best_sim && eq == best_eq && gap < best_gap)) {
          partner = cand;
          best_sim = sim;
          best_eq = eq;
          best_gap = gap;
        }
      }
      NodeId placed;
      if (partner) {
        fold(out.node(partner), f);
        taken.insert(partner);
        placed = partner;
      } else {
        ClusterNode copy = f;
        copy.id = next_id++;
        copy.parent = host;
        copy.children.clear();
        if (!(copy.saturation > out.node(host).saturation))
          copy.saturation = std::nextafter(out.node(host).saturation, 1.0);
        placed = copy.id;
        out.node(host).children.push_back(copy.id);
        out.nodes.emplace(copy.id, std::move(copy));
      }
      enqueue_children(f, placed);
    }
  }
  for (auto& [id, n] : out.nodes) std::sort(n.children.begin(), n.children.end());
  out.version = previous.version + 1;
  out.trained_at = std::max(previous.trained_at, fresh.trained_at);
  return out;
}

// ---------------------------------------------------------------------------
// Validation

void validate_model(const ParseModel& model) {
  auto corrupt = [](NodeId id, const std::string& what) {
    fail(ErrorCode::kCorruptModel, "node " + std::to_string(id) + ": " + what);
  };
  std::size_t root_count = 0;
  for (const auto& [id, n] : model.nodes) {
    if (n.id != id) corrupt(id, "id does not match its key");
    if (!(n.saturation >= 0.0 && n.saturation <= 1.0)) corrupt(id, "saturation outside [0,1]");
    if (n.tmpl.size() != n.group_key.length) corrupt(id, "template length differs from group");
    if (n.group_key.prefix.size() > n.group_key.length) corrupt(id, "group prefix too long");
    for (const Cell& c : n.tmpl.cells) {
      if (!c.is_wildcard() && (c.text.empty() || token_hash_or_wildcard(c.text) != c.hash))
        corrupt(id, "literal hash does not match its text");
    }
    if (n.parent) {
      auto p = model.nodes.find(*n.parent);
      if (p == model.nodes.end()) corrupt(id, "parent does not exist");
      const auto& siblings = p->second.children;
      if (std::find(siblings.begin(), siblings.end(), id) == siblings.end())
        corrupt(id, "parent does not list it as a child");
      if (!(n.saturation > p->second.saturation))
        corrupt(id, "saturation does not exceed its parent's");
      if (!(p->second.group_key == n.group_key)) corrupt(id, "group key differs from parent");
    } else {
      ++root_count;
      auto r = model.roots.find(n.group_key);
      if (r == model.roots.end() || r->second != id) corrupt(id, "root missing from root table");
    }
    std::uint64_t child_sum = 0;
    for (NodeId c : n.children) {
      auto ch = model.nodes.find(c);
      if (ch == model.nodes.end()) corrupt(id, "child does not exist");
      if (ch->second.parent != id) corrupt(id, "child points at another parent");
      child_sum += ch->second.log_count;
    }
    if (!n.children.empty() && child_sum != n.log_count)
      corrupt(id, "log_count differs from the sum over its children");
  }
  if (root_count != model.roots.size())
    fail(ErrorCode::kCorruptModel, "root table does not match parentless nodes");
  // Cycle check: every node must reach a root within |nodes| steps.
  for (const auto& [id, n] : model.nodes) ancestor_chain(model, id);
}

bool structurally_equal(const ParseModel& a, const ParseModel& b) {
  if (a.roots.size() != b.roots.size() || a.nodes.size() != b.nodes.size()) return false;
  auto same_node = [](const ClusterNode& x, const ClusterNode& y) {
    return x.tmpl == y.tmpl && x.saturation == y.saturation && x.group_key == y.group_key &&
           x.children.size() == y.children.size() && x.temporary == y.temporary;
  };
  for (auto ia = a.roots.begin(), ib = b.roots.begin(); ia != a.roots.end(); ++ia, ++ib) {
    if (!(ia->first == ib->first)) return false;
    std::deque<std::pair<NodeId, NodeId>> queue{{ia->second, ib->second}};
    while (!queue.empty()) {
      auto [x, y] = queue.front();
      queue.pop_front();
      const ClusterNode& nx = a.node(x);
      const ClusterNode& ny = b.node(y);
      if (!same_node(nx, ny)) return false;
      for (std::size_t k = 0; k < nx.children.size(); ++k)
        queue.emplace_back(nx.children[k], ny.children[k]);
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json node_to_json(const ClusterNode& n) {
  json cells = json::array();
  for (const Cell& c : n.tmpl.cells) {
    if (c.is_wildcard()) {
      cells.push_back(std::string(kWildcardText));
    } else {
      cells.push_back({{"lit", c.text}});
    }
  }
  json j = {
      {"id", n.id},
      {"parent", n.parent ? json(*n.parent) : json(nullptr)},
      {"saturation", n.saturation},
      {"log_count", n.log_count},
      {"group_key", {{"length", n.group_key.length}, {"prefix", n.group_key.prefix}}},
      {"template", cells},
  };
  if (n.temporary) j["temporary"] = true;
  return j;
}

ClusterNode node_from_json(const json& j, std::size_t index) {
  ClusterNode n;
  std::string where = "node record " + std::to_string(index);
  try {
    n.id = j.at("id").get<NodeId>();
    where = "node " + std::to_string(n.id);
    if (!j.at("parent").is_null()) n.parent = j.at("parent").get<NodeId>();
    n.saturation = j.at("saturation").get<double>();
    n.log_count = j.at("log_count").get<std::uint64_t>();
    const json& gk = j.at("group_key");
    n.group_key.length = gk.at("length").get<std::uint32_t>();
    n.group_key.prefix = gk.at("prefix").get<std::vector<TokenHash>>();
    for (const json& c : j.at("template")) {
      if (c.is_string()) {
        if (c.get<std::string>() != kWildcardText)
          fail(ErrorCode::kParse, where + ": bare template cell must be \"*\"");
        n.tmpl.cells.push_back(Cell::wildcard());
      } else {
        std::string text = c.at("lit").get<std::string>();
        if (text.empty() || text == kWildcardText)
          fail(ErrorCode::kParse, where + ": invalid literal cell");
        n.tmpl.cells.push_back(Cell::literal(std::move(text)));
      }
    }
    n.temporary = j.value("temporary", false);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, where + ": " + e.what());
  }
  return n;
}

}  // namespace

std::string serialize_model(const ParseModel& model) {
  json header = {
      {"format_version", kModelFormatVersion},
      {"topic", model.topic},
      {"model_version", model.version},
      {"hash_function_id", model.hash_function_id},
      {"config_fingerprint", model.config_fingerprint},
      {"trained_at", model.trained_at},
      {"config", config_to_json(model.config)},
  };
  std::string out = "{\"header\":" + header.dump() + ",\n\"nodes\":[";
  bool first = true;
  for (const auto& [id, n] : model.nodes) {
    out += first ? "\n" : ",\n";
    out += node_to_json(n).dump();
    first = false;
  }
  out += "\n]}\n";
  return out;
}

ParseModel deserialize_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("model file: ") + e.what());
  }
  ParseModel model;
  try {
    const json& h = doc.at("header");
    const int format = h.at("format_version").get<int>();
    if (format != kModelFormatVersion)
      fail(ErrorCode::kIncompatibleModel,
           "unsupported model format_version " + std::to_string(format));
    model.hash_function_id = h.at("hash_function_id").get<std::string>();
    if (model.hash_function_id != kHashFunctionId)
      fail(ErrorCode::kIncompatibleModel,
           "model uses hash function '" + model.hash_function_id + "', expected '" +
               std::string(kHashFunctionId) + "'");
    model.topic = h.at("topic").get<std::string>();
    model.version = h.at("model_version").get<std::uint64_t>();
    model.config_fingerprint = h.at("config_fingerprint").get<std::uint64_t>();
    model.trained_at = h.at("trained_at").get<std::int64_t>();
    model.config = h.contains("config") ? config_from_json(h.at("config"))
                                        : default_topic_config();
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("model header: ") + e.what());
  }

  const json* nodes = nullptr;
  try {
    nodes = &doc.at("nodes");
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("model file: ") + e.what());
  }
  if (!nodes->is_array()) fail(ErrorCode::kParse, "model file: nodes must be an array");
  for (std::size_t i = 0; i < nodes->size(); ++i) {
    ClusterNode n = node_from_json((*nodes)[i], i);
    const NodeId id = n.id;
    if (!model.nodes.emplace(id, std::move(n)).second)
      fail(ErrorCode::kCorruptModel, "node " + std::to_string(id) + ": duplicate id");
  }
  for (auto& [id, n] : model.nodes) {
    if (n.parent) {
      auto p = model.nodes.find(*n.parent);
      if (p == model.nodes.end())
        fail(ErrorCode::kCorruptModel, "node " + std::to_string(id) + ": parent does not exist");
      p->second.children.push_back(id);
    } else if (!model.roots.emplace(n.group_key, id).second) {
      fail(ErrorCode::kCorruptModel,
           "node " + std::to_string(id) + ": second root for the same group key");
    }
  }
  validate_model(model);
  return model;
}

void save_model(const ParseModel& model, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp);
    out << serialize_model(model);
    if (!out) fail(ErrorCode::kIo, "write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    fail(ErrorCode::kIo, "cannot move " + tmp + " to " + path);
}

ParseModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

// ---------------------------------------------------------------------------
// Queries

std::vector<TemplateRow> resolve_templates(
    const ParseModel& model, const std::unordered_map<NodeId, std::uint64_t>& counts,
    double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    fail(ErrorCode::kInvalidInput, "threshold must lie in [0,1]");
  std::unordered_map<NodeId, std::uint64_t> resolved;
  for (const auto& [id, n] : counts) {
    if (!model.contains(id)) continue;
    resolved[ancestor_at_threshold(model, id, threshold)] += n;
  }
  std::vector<TemplateRow> rows;
  rows.reserve(resolved.size());
  for (const auto& [id, n] : resolved) {
    const ClusterNode& node = model.node(id);
    rows.push_back({id, display_template(node.tmpl), node.saturation, n});
  }
  std::sort(rows.begin(), rows.end(), [](const TemplateRow& a, const TemplateRow& b) {
    return a.log_count != b.log_count ? a.log_count > b.log_count : a.node_id < b.node_id;
  });
  return rows;
}

std::vector<TemplateRow> query_model(const ParseModel& model, double threshold) {
  std::unordered_map<NodeId, std::uint64_t> counts;
  for (const auto& [id, n] : model.nodes)
    if (n.children.empty()) counts[id] = n.log_count;
  return resolve_templates(model, counts, threshold);
}

}  // namespace satlog
