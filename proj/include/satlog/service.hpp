#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "satlog/matcher.hpp"
#include "satlog/model.hpp"
#include "satlog/types.hpp"

namespace satlog {

/// True iff `buffered` reached the volume threshold (the initial volume
/// before the first training), or the interval elapsed with anything
/// buffered.
bool training_due(const TopicConfig& config, std::uint64_t buffered, bool trained_before,
                  std::chrono::seconds since_last_training);

struct ServiceOptions {
  std::string data_dir;  // empty: nothing is persisted
  unsigned workers = 1;
  // Run triggered trainings on a background thread instead of inline.
  bool background_training = true;
};

struct AncestorRow {
  NodeId node_id = 0;
  double saturation = 0.0;
  std::string display_text;
  std::uint64_t log_count = 0;
};

struct NodeView {
  AncestorRow node;
  std::vector<AncestorRow> ancestors;  // parent first, root last
  std::vector<AncestorRow> children;
};

struct TopicStatus {
  std::uint64_t model_version = 0;
  std::uint64_t buffered_logs = 0;
  std::uint64_t buffered_unique = 0;
  std::uint64_t matched_logs = 0;
  std::size_t node_count = 0;
  bool training = false;
};

// Topic registry with per-topic snapshots, buffers and training triggers.
// All methods are safe to call concurrently.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Creates the topic or replaces its config. A config whose fingerprint
  /// differs from the current one starts the topic over with an empty
  /// model. Throws kConfig.
  void put_topic(const std::string& topic, const TopicConfig& config);
  std::vector<std::string> topics() const;

  /// One result per line, in order; nullopt for lines without tokens.
  /// Throws kNotFound for an unknown topic.
  std::vector<std::optional<MatchResult>> ingest(const std::string& topic,
                                                 std::span<const std::string> lines);

  /// Trains on the buffer and swaps in the merged model; returns the model
  /// version afterwards (unchanged when nothing is buffered).
  std::uint64_t train(const std::string& topic);

  std::vector<TemplateRow> query(const std::string& topic, double threshold) const;
  NodeView node_view(const std::string& topic, NodeId node) const;
  std::string model_text(const std::string& topic) const;
  std::shared_ptr<const ParseModel> model(const std::string& topic) const;
  TopicStatus status(const std::string& topic) const;

  /// Starts training for every topic whose trigger fires at `now`.
  void tick(std::chrono::system_clock::time_point now = std::chrono::system_clock::now());

  /// Waits for background trainings to finish.
  void drain();

 private:
  struct Topic;
  std::shared_ptr<Topic> find(const std::string& topic) const;
  std::uint64_t train_topic(Topic& t);
  void maybe_start_training(const std::shared_ptr<Topic>& t,
                            std::chrono::system_clock::time_point now);
  void persist(const Topic& t, const ParseModel& model) const;
  void restore();

  ServiceOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Topic>> topics_;
  std::mutex threads_mu_;
  std::vector<std::thread> threads_;
};

}  // namespace satlog
