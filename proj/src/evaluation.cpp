#include "satlog/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "satlog/error.hpp"
#include "satlog/matcher.hpp"
#include "satlog/model.hpp"
#include "satlog/preprocess.hpp"
#include "satlog/trainer.hpp"

namespace satlog {

// ---------------------------------------------------------------------------
// CSV

namespace {

// RFC 4180 records: quoted fields may hold commas, doubled quotes and
// newlines. A trailing newline does not start an empty record.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.starts_with("\xEF\xBB\xBF")) i = 3;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
      rows.push_back(std::move(row));
      row.clear();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) fail(ErrorCode::kParse, "csv: unterminated quoted field");
  if (field_started || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

LabeledCorpus parse_loghub_csv(std::string_view text, std::string name) {
  auto rows = parse_csv(text);
  if (rows.empty()) fail(ErrorCode::kParse, "csv '" + name + "': empty file");
  const auto& header = rows.front();
  auto column = [&](std::string_view col) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == col) return i;
    return std::nullopt;
  };
  auto content = column("Content");
  if (!content) fail(ErrorCode::kParse, "csv '" + name + "': missing column Content");
  auto label = column("EventTemplate");
  if (!label) label = column("EventId");
  if (!label)
    fail(ErrorCode::kParse, "csv '" + name + "': missing column EventTemplate (or EventId)");

  LabeledCorpus corpus;
  corpus.name = std::move(name);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() <= std::max(*content, *label))
      fail(ErrorCode::kParse, "csv '" + corpus.name + "': row " + std::to_string(r) +
                                  " has " + std::to_string(row.size()) + " fields");
    if (row[*label].empty())
      fail(ErrorCode::kParse,
           "csv '" + corpus.name + "': row " + std::to_string(r) + " has an empty label");
    corpus.lines.push_back(row[*content]);
    corpus.truth.push_back(row[*label]);
  }
  if (corpus.lines.empty()) fail(ErrorCode::kParse, "csv '" + corpus.name + "': no records");
  return corpus;
}

LabeledCorpus load_loghub(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string name = path.substr(path.find_last_of('/') + 1);
  if (auto dot = name.find('_'); dot != std::string::npos) name = name.substr(0, dot);
  return parse_loghub_csv(ss.str(), name);
}

// ---------------------------------------------------------------------------
// Grouping accuracy

namespace {

template <typename Label>
double grouping_accuracy_impl(std::span<const std::uint64_t> predicted,
                              std::span<const Label> truth) {
  if (predicted.empty() || predicted.size() != truth.size())
    fail(ErrorCode::kInvalidInput, "grouping_accuracy: inputs must be nonempty and equal length");
  // A predicted group is exact iff all its members share one truth label
  // and it holds every log carrying that label.
  std::unordered_map<Label, std::size_t> truth_size;
  for (const Label& t : truth) ++truth_size[t];
  struct Group {
    std::size_t size = 0;
    const Label* label = nullptr;
    bool pure = true;
  };
  std::unordered_map<std::uint64_t, Group> groups;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    Group& g = groups[predicted[i]];
    ++g.size;
    if (!g.label) {
      g.label = &truth[i];
    } else if (!(*g.label == truth[i])) {
      g.pure = false;
    }
  }
  std::size_t correct = 0;
  for (const auto& [id, g] : groups)
    if (g.pure && truth_size[*g.label] == g.size) correct += g.size;
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

}  // namespace

double grouping_accuracy(std::span<const std::uint64_t> predicted,
                         std::span<const std::uint64_t> truth) {
  return grouping_accuracy_impl(predicted, truth);
}

double grouping_accuracy(std::span<const std::uint64_t> predicted,
                         std::span<const std::string> truth) {
  return grouping_accuracy_impl(predicted, truth);
}

// ---------------------------------------------------------------------------
// Benchmark

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Groups assigned to lines that produce no tokens; real node ids start at 1.
constexpr std::uint64_t kEmptyLineGroup = 0;

struct PipelineRun {
  ParseModel model;
  std::vector<std::uint64_t> matched;   // node id per line
  std::vector<std::uint64_t> assigned;  // clustering leaf per line
  std::uint64_t unique = 0;
  double train_seconds = 0.0;
  double match_seconds = 0.0;
};

PipelineRun run_pipeline(std::span<const std::string> lines, const BenchOptions& options) {
  PipelineRun run;
  auto t0 = Clock::now();
  Preprocessor pre(options.config);
  auto batch = pre.process_batch(lines, options.workers);
  std::vector<EncodedLog> training = batch.unique;
  if (training.size() > options.config.sample_cap) {
    std::mt19937_64 rng(options.config.rng_seed);
    std::shuffle(training.begin(), training.end(), rng);
    training.resize(options.config.sample_cap);
  }
  TrainOptions topts;
  topts.workers = options.workers;
  topts.trained_at = 1;
  auto trained = train_model("bench", options.config, training, topts);
  run.train_seconds = seconds_since(t0);
  run.unique = batch.unique.size();

  auto t1 = Clock::now();
  MatchIndex index = rebuild_index(trained.model);
  run.matched.resize(lines.size());
  NodeId next_orphan = trained.model.next_id();
  std::vector<std::uint64_t> orphan_of(batch.unique.size(), 0);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::int64_t u = batch.line_to_unique[i];
    if (u < 0) {
      run.matched[i] = kEmptyLineGroup;
      continue;
    }
    if (auto r = index.match(batch.unique[static_cast<std::size_t>(u)].hashes)) {
      run.matched[i] = r->node_id;
    } else {
      // Left out of a capped training sample and matching nothing: behaves
      // like a temporary node of its own.
      auto& o = orphan_of[static_cast<std::size_t>(u)];
      if (!o) o = next_orphan++;
      run.matched[i] = o;
    }
  }
  run.match_seconds = seconds_since(t1);

  run.assigned.resize(lines.size());
  if (training.size() == batch.unique.size()) {
    // Unsampled, so training[k] is batch.unique[k].
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::int64_t u = batch.line_to_unique[i];
      run.assigned[i] =
          u < 0 ? kEmptyLineGroup : trained.leaf_of_input[static_cast<std::size_t>(u)];
    }
  } else {
    run.assigned = run.matched;
  }
  run.model = std::move(trained.model);
  return run;
}

std::vector<std::uint64_t> resolve_at(const ParseModel& model,
                                      const std::vector<std::uint64_t>& ids, double threshold) {
  std::vector<std::uint64_t> out(ids.size());
  std::unordered_map<std::uint64_t, std::uint64_t> memo;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::uint64_t id = ids[i];
    if (!model.contains(id)) {
      out[i] = id;
      continue;
    }
    auto it = memo.find(id);
    if (it == memo.end()) it = memo.emplace(id, ancestor_at_threshold(model, id, threshold)).first;
    out[i] = it->second;
  }
  return out;
}

std::uint64_t distinct_count(const std::vector<std::uint64_t>& ids) {
  std::vector<std::uint64_t> v = ids;
  std::sort(v.begin(), v.end());
  return static_cast<std::uint64_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<BenchReport> run_benchmark(const LabeledCorpus& corpus, const BenchOptions& options) {
  if (corpus.lines.size() != corpus.truth.size())
    fail(ErrorCode::kInvalidInput, "run_benchmark: lines and labels differ in length");
  if (corpus.lines.empty()) fail(ErrorCode::kInvalidInput, "run_benchmark: empty corpus");
  PipelineRun run = run_pipeline(corpus.lines, options);

  BenchReport base;
  base.dataset = corpus.name;
  base.total_logs = corpus.lines.size();
  base.train_seconds = run.train_seconds;
  base.match_seconds = run.match_seconds;
  const double elapsed = run.train_seconds + run.match_seconds;
  base.throughput_logs_per_second =
      elapsed > 0 ? static_cast<double>(base.total_logs) / elapsed : 0.0;
  base.unique_logs = run.unique;

  std::vector<BenchReport> reports;
  BenchReport leaf = base;
  leaf.grouping_accuracy = grouping_accuracy(run.matched, corpus.truth);
  leaf.assignment_grouping_accuracy = grouping_accuracy(run.assigned, corpus.truth);
  leaf.template_count = distinct_count(run.matched);
  reports.push_back(leaf);
  for (double t : options.thresholds) {
    if (!(t >= 0.0 && t <= 1.0))
      fail(ErrorCode::kInvalidInput, "run_benchmark: threshold outside [0,1]");
    BenchReport r = base;
    r.threshold = t;
    auto matched = resolve_at(run.model, run.matched, t);
    auto assigned = resolve_at(run.model, run.assigned, t);
    r.grouping_accuracy = grouping_accuracy(matched, corpus.truth);
    r.assignment_grouping_accuracy = grouping_accuracy(assigned, corpus.truth);
    r.template_count = distinct_count(matched);
    reports.push_back(r);
  }
  return reports;
}

std::vector<ScalingPoint> scaling_run(std::span<const std::string> lines,
                                      std::span<const std::uint64_t> sizes,
                                      const BenchOptions& options, unsigned repeats) {
  if (repeats == 0) fail(ErrorCode::kInvalidInput, "scaling_run: repeats must be positive");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0 || sizes[i] > lines.size() || (i && sizes[i] <= sizes[i - 1]))
      fail(ErrorCode::kInvalidInput,
           "scaling_run: sizes must ascend and lie within the corpus size");
  }
  std::vector<ScalingPoint> out;
  for (std::uint64_t n : sizes) {
    double best = 0;
    for (unsigned r = 0; r < repeats; ++r) {
      PipelineRun run = run_pipeline(lines.first(static_cast<std::size_t>(n)), options);
      const double t = run.train_seconds + run.match_seconds;
      if (r == 0 || t < best) best = t;
    }
    out.push_back({n, best});
  }
  return out;
}

double loglog_slope(std::span<const ScalingPoint> points) {
  if (points.size() < 2) fail(ErrorCode::kInvalidInput, "loglog_slope: need two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(points.size());
  for (const auto& p : points) {
    if (p.n == 0 || !(p.seconds > 0))
      fail(ErrorCode::kInvalidInput, "loglog_slope: sizes and times must be positive");
    const double x = std::log(static_cast<double>(p.n));
    const double y = std::log(p.seconds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = k * sxx - sx * sx;
  if (den == 0) fail(ErrorCode::kInvalidInput, "loglog_slope: sizes must differ");
  return (k * sxy - sx * sy) / den;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

// Field kinds: U unique decimal, I ipv4, H hex, N small integer (0..99),
// W word from a short list, D duration (bounded integer), P path.
struct Skeleton {
  std::string_view text;
  std::uint32_t weight;
};

constexpr Skeleton kSkeletons[] = {
    {"Receiving block blk_{U} src: /{I}:{N} dest: /{I}:50010", 12},
    {"PacketResponder {N} for block blk_{U} terminating", 12},
    {"Received block blk_{U} of size {D} from /{I}", 10},
    {"BLOCK* NameSystem.addStoredBlock: blockMap updated: {I}:50010 is added to blk_{U} size {D}", 8},
    {"Verification succeeded for blk_{U}", 4},
    {"Deleting block blk_{U} file /data/dfs/current/subdir{N}/blk_{U}", 4},
    {"session {U} opened for user {W} by (uid=0)", 6},
    {"session {U} closed for user {W}", 6},
    {"Accepted password for {W} from {I} port {D} ssh2", 3},
    {"Failed password for invalid user {W} from {I} port {D} ssh2", 2},
    {"GET /api/v1/items/{U} HTTP/1.1 200 {D} {D}ms", 8},
    {"POST /api/v1/orders HTTP/1.1 201 {D} {D}ms request_id={U}", 5},
    {"task {U} finished in {D} ms on executor {N}", 6},
    {"Starting task {N}.0 in stage {N}.0 (TID {U}, worker-{N}, partition {D}, PROCESS_LOCAL)", 5},
    {"Removed broadcast_{U}_piece0 on {I}:{D} in memory (size: {D} B, free: {D} MB)", 3},
    {"cache miss key={H} shard={N} latency={D}us", 4},
    {"connection reset by peer {I}:{D} after {D} bytes", 2},
    {"worker {N} heartbeat ok load={N} queue={D}", 3},
    {"checkpoint {U} written to /var/lib/store/ckpt-{U}.bin ({D} bytes)", 2},
    {"user {W} updated profile field {W} at {T}", 2},
    {"Scheduled job {U} with priority {N} for tenant {W}", 2},
    {"jk2_init() Found child {U} in scoreboard slot {N}", 3},
    {"workerEnv.init() ok /etc/httpd/conf/workers2.properties", 2},
    {"mod_jk child workerEnv in error state {N}", 2},
    {"release lock {H} flg {H} uid {U}", 2},
    {"acquire lock {H} flg {H} uid {U}", 2},
    {"GC pause young {D}ms heap {D}M->{D}M", 3},
    {"Timeout waiting for response from {I}:{D} after {D} retries", 1},
    {"Disk /dev/sd{W} usage {N} percent", 1},
    {"Shutdown hook invoked", 1},
};

constexpr std::string_view kWords[] = {"root", "admin", "alice", "bob", "carol",
                                       "dave", "eve", "mallory", "oscar", "trent"};

}  // namespace

LabeledCorpus generate_corpus(std::uint64_t n, std::uint64_t seed) {
  LabeledCorpus corpus;
  corpus.name = "synthetic";
  corpus.lines.reserve(n);
  corpus.truth.reserve(n);
  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> weights;
  for (const auto& s : kSkeletons) weights.push_back(s.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::uint64_t counter = mix64(seed);
  std::string line;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t k = pick(rng);
    const std::string_view text = kSkeletons[k].text;
    line.clear();
    for (std::size_t p = 0; p < text.size(); ++p) {
      if (text[p] != '{' || p + 2 >= text.size() || text[p + 2] != '}') {
        line += text[p];
        continue;
      }
      switch (text[p + 1]) {
        case 'U':  // distinct on every draw
          line += std::to_string(mix64(++counter) >> 8);
          break;
        case 'I':
          line += "10." + std::to_string(rng() % 256) + "." + std::to_string(rng() % 256) +
                  "." + std::to_string(rng() % 256);
          break;
        case 'H': {
          char buf[24];
          std::snprintf(buf, sizeof buf, "0x%llx",
                        static_cast<unsigned long long>(rng() & 0xffffffffULL));
          line += buf;
          break;
        }
        case 'N':
          line += std::to_string(rng() % 100);
          break;
        case 'W':
          line += kWords[rng() % std::size(kWords)];
          break;
        case 'D':
          line += std::to_string(rng() % 100000);
          break;
        case 'T': {
          char buf[32];
          std::snprintf(buf, sizeof buf, "2024-03-%02u 12:%02u:%02u",
                        static_cast<unsigned>(1 + rng() % 28), static_cast<unsigned>(rng() % 60),
                        static_cast<unsigned>(rng() % 60));
          line += buf;
          break;
        }
        default:
          line.append(text.substr(p, 3));
      }
      p += 2;
    }
    corpus.lines.push_back(line);
    corpus.truth.push_back("E" + std::to_string(k + 1));
  }
  return corpus;
}

std::string report_to_json(const BenchReport& r) {
  nlohmann::json j = {
      {"dataset", r.dataset},
      {"grouping_accuracy", r.grouping_accuracy},
      {"total_logs", r.total_logs},
      {"train_seconds", r.train_seconds},
      {"match_seconds", r.match_seconds},
      {"throughput_logs_per_second", r.throughput_logs_per_second},
      {"threshold", r.threshold ? nlohmann::json(*r.threshold) : nlohmann::json(nullptr)},
      {"assignment_grouping_accuracy", r.assignment_grouping_accuracy},
      {"unique_logs", r.unique_logs},
      {"template_count", r.template_count},
  };
  return j.dump();
}

}  // namespace satlog
