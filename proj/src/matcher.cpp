#include "satlog/matcher.hpp"

#include <algorithm>
#include <set>

#include "satlog/error.hpp"
#include "satlog/model.hpp"

namespace satlog {

namespace {

GroupKey key_of(std::span<const TokenHash> hashes, std::uint32_t k) {
  GroupKey key;
  key.length = static_cast<std::uint32_t>(hashes.size());
  const std::size_t n = std::min<std::size_t>(k, hashes.size());
  key.prefix.assign(hashes.begin(), hashes.begin() + static_cast<std::ptrdiff_t>(n));
  return key;
}

bool entry_before(const MatchIndex::Entry& a, const MatchIndex::Entry& b) {
  if (a.saturation != b.saturation) return a.saturation > b.saturation;
  if (a.wildcards != b.wildcards) return a.wildcards < b.wildcards;
  return a.id < b.id;
}

MatchIndex::Entry entry_of(const ClusterNode& node) {
  MatchIndex::Entry e;
  e.id = node.id;
  e.saturation = node.saturation;
  e.wildcards = node.tmpl.wildcard_count();
  e.cells.reserve(node.tmpl.size());
  for (const Cell& c : node.tmpl.cells) e.cells.push_back(c.hash);
  return e;
}

bool cells_match(const std::vector<TokenHash>& cells, std::span<const TokenHash> hashes) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] != kWildcardHash && cells[i] != hashes[i]) return false;
  }
  return true;
}

}  // namespace

std::size_t GroupKeyHasher::operator()(const GroupKey& key) const noexcept {
  std::uint64_t h = mix64(0x6a09e667f3bcc909ULL ^ key.length);
  for (TokenHash t : key.prefix) h = mix64(h ^ t);
  return static_cast<std::size_t>(h);
}

MatchIndex MatchIndex::build(const ParseModel& model, std::optional<double> tier) {
  MatchIndex index;
  index.prefix_k_ = model.config.prefix_k;
  std::set<NodeId> chosen;
  for (const auto& [id, n] : model.nodes) {
    if (!n.children.empty()) continue;
    if (n.temporary || !tier) {
      chosen.insert(id);
    } else {
      chosen.insert(ancestor_at_threshold(model, id, *tier));
    }
  }
  for (NodeId id : chosen) {
    const ClusterNode& n = model.node(id);
    index.add(index.groups_[n.group_key], entry_of(n), false);
  }
  for (auto& [key, g] : index.groups_) std::sort(g.scan.begin(), g.scan.end(), entry_before);
  return index;
}

void MatchIndex::add(Group& g, Entry e, bool keep_sorted) {
  ++size_;
  if (e.wildcards == 0 && e.saturation >= 1.0) {
    auto [it, fresh] = g.exact.try_emplace(e.cells, e);
    if (!fresh && e.id < it->second.id) it->second = std::move(e);
    return;
  }
  if (keep_sorted) {
    auto pos = std::upper_bound(g.scan.begin(), g.scan.end(), e, entry_before);
    g.scan.insert(pos, std::move(e));
  } else {
    g.scan.push_back(std::move(e));
  }
}

void MatchIndex::insert(const ClusterNode& node) {
  add(groups_[node.group_key], entry_of(node), true);
}

std::vector<MatchIndex::Entry> MatchIndex::candidates(const GroupKey& key) const {
  std::vector<Entry> out;
  auto it = groups_.find(key);
  if (it == groups_.end()) return out;
  for (const auto& [cells, e] : it->second.exact) out.push_back(e);
  out.insert(out.end(), it->second.scan.begin(), it->second.scan.end());
  std::sort(out.begin(), out.end(), entry_before);
  return out;
}

std::optional<MatchResult> MatchIndex::match(std::span<const TokenHash> hashes) const {
  if (hashes.empty()) return std::nullopt;
  auto it = groups_.find(key_of(hashes, prefix_k_));
  if (it == groups_.end()) return std::nullopt;
  const Group& g = it->second;
  if (!g.exact.empty()) {
    thread_local std::vector<TokenHash> probe;
    probe.assign(hashes.begin(), hashes.end());
    if (auto e = g.exact.find(probe); e != g.exact.end())
      return MatchResult{e->second.id, e->second.saturation, true};
  }
  for (const Entry& e : g.scan) {
    if (cells_match(e.cells, hashes)) return MatchResult{e.id, e.saturation, true};
  }
  return std::nullopt;
}

std::optional<MatchResult> match(std::span<const TokenHash> hashes, const MatchIndex& index) {
  return index.match(hashes);
}

NodeId insert_temporary(ParseModel& model, std::span<const TokenHash> hashes,
                        std::span<const std::string_view> tokens) {
  if (hashes.empty() || hashes.size() != tokens.size())
    fail(ErrorCode::kInvalidInput, "insert_temporary: empty log or token/hash mismatch");
  const GroupKey key = key_of(hashes, model.config.prefix_k);
  NodeId next = model.next_id();

  auto make_scaffold = [&](std::uint64_t count) {
    ClusterNode root;
    root.id = next++;
    root.tmpl.cells.assign(hashes.size(), Cell::wildcard());
    root.saturation = 0.0;
    root.log_count = count;
    root.group_key = key;
    root.temporary = true;
    return root;
  };

  NodeId host;
  auto it = model.roots.find(key);
  if (it == model.roots.end()) {
    ClusterNode root = make_scaffold(0);
    host = root.id;
    model.roots[key] = host;
    model.nodes.emplace(host, std::move(root));
  } else if (model.node(it->second).children.empty()) {
    // A leaf root cannot take a saturation-1 child; lift it under a fresh
    // scaffold root so both become siblings.
    const NodeId old_root = it->second;
    ClusterNode root = make_scaffold(model.node(old_root).log_count);
    host = root.id;
    root.children.push_back(old_root);
    model.node(old_root).parent = host;
    it->second = host;
    model.nodes.emplace(host, std::move(root));
  } else {
    host = it->second;
  }

  ClusterNode leaf;
  leaf.id = next++;
  leaf.parent = host;
  leaf.tmpl.cells.reserve(hashes.size());
  for (std::size_t i = 0; i < hashes.size(); ++i) {
    Cell c;
    c.hash = hashes[i];
    if (c.hash != kWildcardHash) c.text = std::string(tokens[i]);
    leaf.tmpl.cells.push_back(std::move(c));
  }
  leaf.saturation = 1.0;
  leaf.log_count = 1;
  leaf.group_key = key;
  leaf.temporary = true;
  model.node(host).children.push_back(leaf.id);
  model.node(host).log_count += 1;
  const NodeId id = leaf.id;
  model.nodes.emplace(id, std::move(leaf));
  return id;
}

Matcher::Matcher(ParseModel model) { publish(std::move(model)); }

std::shared_ptr<const Snapshot> Matcher::snapshot() const {
  std::lock_guard lock(snapshot_mu_);
  return snapshot_;
}

void Matcher::publish(ParseModel model) {
  auto snap = std::make_shared<Snapshot>();
  auto index = std::make_shared<MatchIndex>(rebuild_index(model));
  snap->model = std::make_shared<const ParseModel>(std::move(model));
  snap->index = std::move(index);
  std::lock_guard lock(snapshot_mu_);
  snapshot_ = std::move(snap);
}

std::optional<MatchResult> Matcher::match(std::span<const TokenHash> hashes) const {
  return snapshot()->index->match(hashes);
}

std::vector<MatchResult> Matcher::match_or_insert(std::span<const Item> items) {
  std::vector<MatchResult> out(items.size());
  std::vector<std::size_t> misses;
  {
    auto snap = snapshot();
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (auto r = snap->index->match(items[i].hashes)) {
        out[i] = *r;
      } else {
        misses.push_back(i);
      }
    }
  }
  if (misses.empty()) return out;

  std::lock_guard writer(writer_mu_);
  // Another writer may have published since the lock-free pass; recheck
  // against the latest snapshot before inserting anything.
  auto base = snapshot();
  ParseModel model = *base->model;
  MatchIndex index = *base->index;
  for (std::size_t i : misses) {
    const Item& item = items[i];
    if (auto r = index.match(item.hashes)) {
      out[i] = *r;
      continue;
    }
    const NodeId id = insert_temporary(model, item.hashes, item.tokens);
    index.insert(model.node(id));
    out[i] = MatchResult{id, 1.0, false};
  }
  auto snap = std::make_shared<Snapshot>();
  snap->model = std::make_shared<const ParseModel>(std::move(model));
  snap->index = std::make_shared<const MatchIndex>(std::move(index));
  std::lock_guard lock(snapshot_mu_);
  snapshot_ = std::move(snap);
  return out;
}

}  // namespace satlog
