#include "satlog/service.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <shared_mutex>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "satlog/config.hpp"
#include "satlog/error.hpp"
#include "satlog/log.hpp"
#include "satlog/preprocess.hpp"
#include "satlog/trainer.hpp"

namespace satlog {

namespace fs = std::filesystem;
using Clock = std::chrono::system_clock;

bool training_due(const TopicConfig& config, std::uint64_t buffered, bool trained_before,
                  std::chrono::seconds since_last_training) {
  if (buffered == 0) return false;
  const std::uint64_t volume =
      trained_before ? config.training_volume_threshold : config.initial_training_volume;
  return buffered >= volume || since_last_training >= config.training_interval;
}

struct Service::Topic {
  std::string name;
  TopicConfig config;
  std::unique_ptr<Preprocessor> pre;
  std::unique_ptr<Matcher> matcher;

  // Shared by ingest and query, exclusive while a trained model is swapped
  // in and the per-node counts are re-keyed.
  mutable std::shared_mutex swap_mu;
  mutable std::mutex state_mu;
  std::mutex train_mu;  // one training at a time

  struct Counted {
    std::uint64_t count = 0;
    std::vector<TokenHash> hashes;  // a log that matched the node
    std::vector<std::string> tokens;
  };
  Deduplicator buffer;
  std::unordered_map<NodeId, Counted> counts;
  std::uint64_t matched_total = 0;
  Clock::time_point last_trained_at = Clock::now();
  bool trained_before = false;
  bool training = false;
};

namespace {

void check_topic_name(const std::string& topic) {
  const bool ok = !topic.empty() && topic.size() <= 128 && topic != "." && topic != ".." &&
                  std::all_of(topic.begin(), topic.end(), [](unsigned char c) {
                    return std::isalnum(c) || c == '-' || c == '_' || c == '.';
                  });
  if (!ok)
    fail(ErrorCode::kInvalidInput,
         "topic names use letters, digits, '-', '_' and '.' (got '" + topic + "')");
}

ParseModel empty_model(const std::string& topic, const TopicConfig& config) {
  ParseModel m;
  m.topic = topic;
  m.config = config;
  m.config_fingerprint = config_fingerprint(config);
  return m;
}

AncestorRow row_of(const ClusterNode& n) {
  return {n.id, n.saturation, display_template(n.tmpl), n.log_count};
}

}  // namespace

Service::Service(ServiceOptions options) : options_(std::move(options)) {
  if (!options_.data_dir.empty()) restore();
}

Service::~Service() { drain(); }

void Service::drain() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(threads_mu_);
    threads.swap(threads_);
  }
  for (auto& t : threads) t.join();
}

std::shared_ptr<Service::Topic> Service::find(const std::string& topic) const {
  std::lock_guard lock(mu_);
  auto it = topics_.find(topic);
  if (it == topics_.end()) fail(ErrorCode::kNotFound, "unknown topic '" + topic + "'");
  return it->second;
}

std::vector<std::string> Service::topics() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, t] : topics_) out.push_back(name);
  return out;
}

void Service::put_topic(const std::string& topic, const TopicConfig& config) {
  check_topic_name(topic);
  validate_config(config);
  std::shared_ptr<Topic> existing;
  {
    std::lock_guard lock(mu_);
    if (auto it = topics_.find(topic); it != topics_.end()) existing = it->second;
  }
  if (existing && config_fingerprint(existing->config) == config_fingerprint(config)) {
    // Cadence or index knobs only: keep model, buffer and counts.
    std::unique_lock swap(existing->swap_mu);
    std::lock_guard state(existing->state_mu);
    ParseModel m = *existing->matcher->snapshot()->model;
    m.config = config;
    existing->matcher->publish(std::move(m));
    existing->config = config;
  } else {
    auto t = std::make_shared<Topic>();
    t->name = topic;
    t->config = config;
    t->pre = std::make_unique<Preprocessor>(config);
    t->matcher = std::make_unique<Matcher>(empty_model(topic, config));
    std::lock_guard lock(mu_);
    topics_[topic] = std::move(t);
  }
  if (!options_.data_dir.empty()) {
    fs::path dir = fs::path(options_.data_dir) / topic;
    fs::create_directories(dir);
    std::ofstream out(dir / "config.json", std::ios::trunc);
    out << config_to_json(config).dump(2) << "\n";
    if (!out) fail(ErrorCode::kIo, "cannot write config for topic '" + topic + "'");
  }
}

std::vector<std::optional<MatchResult>> Service::ingest(const std::string& topic,
                                                        std::span<const std::string> lines) {
  auto t = find(topic);
  std::vector<std::optional<EncodedLog>> encoded(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) encoded[i] = t->pre->process(lines[i]);

  std::vector<std::vector<std::string_view>> views;
  std::vector<Matcher::Item> items;
  std::vector<std::size_t> item_line;
  views.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!encoded[i]) continue;
    views.emplace_back(encoded[i]->tokens.begin(), encoded[i]->tokens.end());
    item_line.push_back(i);
  }
  for (std::size_t k = 0; k < item_line.size(); ++k)
    items.push_back({encoded[item_line[k]]->hashes, views[k]});

  std::vector<std::optional<MatchResult>> out(lines.size());
  {
    std::shared_lock swap(t->swap_mu);
    auto results = t->matcher->match_or_insert(items);
    std::lock_guard state(t->state_mu);
    for (std::size_t k = 0; k < results.size(); ++k) {
      EncodedLog& log = *encoded[item_line[k]];
      auto& c = t->counts[results[k].node_id];
      if (c.count++ == 0) {
        c.hashes = log.hashes;
        c.tokens = log.tokens;
      }
      ++t->matched_total;
      t->buffer.add(std::move(log));
      out[item_line[k]] = results[k];
    }
  }
  maybe_start_training(t, Clock::now());
  return out;
}

void Service::maybe_start_training(const std::shared_ptr<Topic>& t, Clock::time_point now) {
  {
    std::lock_guard state(t->state_mu);
    if (t->training) return;
    auto since = std::chrono::duration_cast<std::chrono::seconds>(now - t->last_trained_at);
    if (!training_due(t->config, t->buffer.total_count(), t->trained_before, since)) return;
    t->training = true;
  }
  auto run = [this, t] {
    try {
      train_topic(*t);
    } catch (const std::exception& e) {
      log_error("training topic '" + t->name + "' failed: " + e.what());
      std::lock_guard state(t->state_mu);
      t->training = false;
    }
  };
  if (!options_.background_training) {
    run();
    return;
  }
  std::lock_guard lock(threads_mu_);
  threads_.emplace_back(run);
}

void Service::tick(Clock::time_point now) {
  std::vector<std::shared_ptr<Topic>> all;
  {
    std::lock_guard lock(mu_);
    for (const auto& [name, t] : topics_) all.push_back(t);
  }
  for (const auto& t : all) maybe_start_training(t, now);
}

std::uint64_t Service::train(const std::string& topic) { return train_topic(*find(topic)); }

std::uint64_t Service::train_topic(Topic& t) {
  std::lock_guard one(t.train_mu);
  std::vector<EncodedLog> logs;
  TopicConfig config;
  {
    std::lock_guard state(t.state_mu);
    config = t.config;
    if (t.buffer.unique_count() == 0) {
      t.training = false;
      return t.matcher->snapshot()->model->version;
    }
    logs = t.buffer.take();
    t.training = true;
  }

  try {
    auto prev = t.matcher->snapshot()->model;
    if (logs.size() > config.sample_cap) {
      std::mt19937_64 rng(mix64(config.rng_seed ^ (prev->version + 1)));
      std::shuffle(logs.begin(), logs.end(), rng);
      logs.resize(config.sample_cap);
    }
    TrainOptions opts;
    opts.workers = options_.workers;
    ParseModel fresh = train_model(t.name, config, logs, opts).model;
    ParseModel merged = merge_models(*prev, fresh, config.merge_similarity_threshold);
    merged.config = config;
    validate_model(merged);

    std::uint64_t version;
    {
      std::unique_lock swap(t.swap_mu);
      std::lock_guard state(t.state_mu);
      t.matcher->publish(std::move(merged));
      // Re-key matched counts onto the new node ids through each node's
      // stored log; logs no longer matched get temporary nodes again.
      std::vector<Topic::Counted> old;
      old.reserve(t.counts.size());
      for (auto& [id, c] : t.counts) old.push_back(std::move(c));
      std::vector<std::vector<std::string_view>> views;
      std::vector<Matcher::Item> items;
      views.reserve(old.size());
      for (const auto& c : old) {
        views.emplace_back(c.tokens.begin(), c.tokens.end());
        items.push_back({c.hashes, views.back()});
      }
      auto results = t.matcher->match_or_insert(items);
      std::unordered_map<NodeId, Topic::Counted> rekeyed;
      for (std::size_t k = 0; k < old.size(); ++k) {
        auto& dst = rekeyed[results[k].node_id];
        if (dst.count == 0) {
          dst.hashes = std::move(old[k].hashes);
          dst.tokens = std::move(old[k].tokens);
        }
        dst.count += old[k].count;
      }
      t.counts.swap(rekeyed);
      t.last_trained_at = Clock::now();
      t.trained_before = true;
      t.training = false;
      version = t.matcher->snapshot()->model->version;
    }
    persist(t, *t.matcher->snapshot()->model);
    log_info("topic '" + t.name + "' trained, model version " + std::to_string(version));
    return version;
  } catch (...) {
    std::lock_guard state(t.state_mu);
    for (auto& l : logs) t.buffer.add(std::move(l));
    t.training = false;
    throw;
  }
}

std::vector<TemplateRow> Service::query(const std::string& topic, double threshold) const {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    fail(ErrorCode::kInvalidInput, "threshold must lie in [0,1]");
  auto t = find(topic);
  std::shared_lock swap(t->swap_mu);
  auto model = t->matcher->snapshot()->model;
  std::unordered_map<NodeId, std::uint64_t> counts;
  {
    std::lock_guard state(t->state_mu);
    for (const auto& [id, c] : t->counts) counts[id] = c.count;
  }
  return resolve_templates(*model, counts, threshold);
}

NodeView Service::node_view(const std::string& topic, NodeId node) const {
  auto model = find(topic)->matcher->snapshot()->model;
  NodeView view;
  const ClusterNode& n = model->node(node);
  view.node = row_of(n);
  auto chain = ancestor_chain(*model, node);
  for (std::size_t i = 1; i < chain.size(); ++i) view.ancestors.push_back(row_of(model->node(chain[i])));
  for (NodeId c : n.children) view.children.push_back(row_of(model->node(c)));
  return view;
}

std::shared_ptr<const ParseModel> Service::model(const std::string& topic) const {
  return find(topic)->matcher->snapshot()->model;
}

std::string Service::model_text(const std::string& topic) const {
  return serialize_model(*model(topic));
}

TopicStatus Service::status(const std::string& topic) const {
  auto t = find(topic);
  auto model = t->matcher->snapshot()->model;
  TopicStatus s;
  s.model_version = model->version;
  s.node_count = model->nodes.size();
  std::lock_guard state(t->state_mu);
  s.buffered_logs = t->buffer.total_count();
  s.buffered_unique = t->buffer.unique_count();
  s.matched_logs = t->matched_total;
  s.training = t->training;
  return s;
}

void Service::persist(const Topic& t, const ParseModel& model) const {
  if (options_.data_dir.empty()) return;
  fs::path dir = fs::path(options_.data_dir) / t.name;
  fs::create_directories(dir);
  save_model(model, (dir / "model.json").string());
}

void Service::restore() {
  fs::path root(options_.data_dir);
  if (!fs::exists(root)) {
    fs::create_directories(root);
    return;
  }
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const fs::path cfg = entry.path() / "config.json";
    if (!fs::exists(cfg)) continue;
    const std::string name = entry.path().filename().string();
    try {
      auto t = std::make_shared<Topic>();
      t->name = name;
      t->config = load_config_file(cfg.string());
      t->pre = std::make_unique<Preprocessor>(t->config);
      ParseModel model = empty_model(name, t->config);
      const fs::path mp = entry.path() / "model.json";
      if (fs::exists(mp)) {
        ParseModel loaded = load_model(mp.string());
        if (loaded.config_fingerprint == model.config_fingerprint && loaded.topic == name) {
          loaded.config = t->config;
          model = std::move(loaded);
          t->trained_before = true;
        } else {
          log_warn("ignoring model of topic '" + name + "': it was built with another config");
        }
      }
      t->matcher = std::make_unique<Matcher>(std::move(model));
      std::lock_guard lock(mu_);
      topics_[name] = std::move(t);
    } catch (const std::exception& e) {
      log_error("cannot restore topic '" + name + "': " + e.what());
    }
  }
}

}  // namespace satlog
