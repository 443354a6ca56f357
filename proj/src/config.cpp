#include "satlog/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <boost/regex.hpp>
#include <nlohmann/json.hpp>

#include "satlog/error.hpp"

namespace satlog {

using nlohmann::json;

const std::vector<VariablePatternSpec>& default_variable_patterns() {
  static const std::vector<VariablePatternSpec> patterns = {
      {R"(\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:[.,]\d+)?(?:Z|[+-]\d{2}:?\d{2})?)",
       "iso-timestamp"},
      {R"(\b(?:Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) +\d{1,2} \d{2}:\d{2}:\d{2}\b)",
       "syslog-timestamp"},
      {R"(\b[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}\b)",
       "uuid"},
      {R"(\b[0-9a-fA-F]{32}\b)", "md5"},
      {R"(\b(?:\d{1,3}\.){3}\d{1,3}(?::\d{1,5})?\b)", "ipv4"},
      {R"(\b0[xX][0-9a-fA-F]+\b)", "hex"},
  };
  return patterns;
}

TopicConfig default_topic_config() {
  TopicConfig c;
  c.variable_patterns = default_variable_patterns();
  return c;
}

void check_pattern_complexity(std::string_view pattern) {
  auto reject = [&](const char* what) {
    fail(ErrorCode::kConfig, std::string("pattern '") + std::string(pattern) +
                                 "' uses " + what +
                                 ", which is not allowed in linear-time rules");
  };
  bool in_class = false;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    char c = pattern[i];
    if (c == '\\') {
      if (i + 1 >= pattern.size()) break;
      char n = pattern[i + 1];
      if (!in_class) {
        if (n >= '1' && n <= '9') reject("a backreference");
        if (n == 'k' || n == 'g') reject("a backreference");
      }
      ++i;
      continue;
    }
    if (in_class) {
      if (c == ']') in_class = false;
      continue;
    }
    if (c == '[') {
      in_class = true;
      // A leading ']' (or '^]') is literal inside a class.
      if (i + 1 < pattern.size() && pattern[i + 1] == '^') ++i;
      if (i + 1 < pattern.size() && pattern[i + 1] == ']') ++i;
      continue;
    }
    if (c == '(' && i + 1 < pattern.size() && pattern[i + 1] == '?') {
      std::string_view rest = pattern.substr(i + 2);
      if (rest.starts_with("=") || rest.starts_with("!")) reject("lookahead");
      if (rest.starts_with("<=") || rest.starts_with("<!")) reject("lookbehind");
      if (rest.starts_with("(")) reject("a conditional");
      if (rest.starts_with("R") || (!rest.empty() && rest[0] >= '0' && rest[0] <= '9'))
        reject("recursion");
      if (rest.starts_with("P=") || rest.starts_with("P>") || rest.starts_with("&"))
        reject("a backreference");
    }
  }
}

void validate_config(const TopicConfig& config) {
  auto compile = [](const std::string& p) {
    check_pattern_complexity(p);
    try {
      boost::regex re(p, boost::regex::perl);
    } catch (const boost::regex_error& e) {
      fail(ErrorCode::kConfig, "invalid pattern '" + p + "': " + e.what());
    }
  };
  if (!config.tokenizer_pattern.empty()) compile(config.tokenizer_pattern);
  for (const auto& v : config.variable_patterns) {
    if (v.pattern.empty()) fail(ErrorCode::kConfig, "empty variable pattern");
    compile(v.pattern);
  }
  if (config.training_volume_threshold == 0)
    fail(ErrorCode::kConfig, "training_volume_threshold must be positive");
  if (config.training_interval.count() <= 0)
    fail(ErrorCode::kConfig, "training_interval must be positive");
  if (config.sample_cap == 0) fail(ErrorCode::kConfig, "sample_cap must be positive");
  if (!(config.merge_similarity_threshold >= 0.0 &&
        config.merge_similarity_threshold <= 1.0))
    fail(ErrorCode::kConfig, "merge_similarity_threshold must lie in [0,1]");
  if (config.index_threshold &&
      !(*config.index_threshold >= 0.0 && *config.index_threshold <= 1.0))
    fail(ErrorCode::kConfig, "index_threshold must lie in [0,1]");
}

json config_to_json(const TopicConfig& c) {
  json patterns = json::array();
  for (const auto& v : c.variable_patterns)
    patterns.push_back({{"pattern", v.pattern}, {"label", v.label}});
  json j = {
      {"tokenizer_pattern", c.tokenizer_pattern},
      {"variable_patterns", patterns},
      {"prefix_k", c.prefix_k},
      {"training_volume_threshold", c.training_volume_threshold},
      {"initial_training_volume", c.initial_training_volume},
      {"training_interval_seconds", c.training_interval.count()},
      {"sample_cap", c.sample_cap},
      {"merge_similarity_threshold", c.merge_similarity_threshold},
      {"rng_seed", c.rng_seed},
  };
  if (c.index_threshold) j["index_threshold"] = *c.index_threshold;
  return j;
}

namespace {

std::vector<VariablePatternSpec> patterns_from(const json& arr) {
  if (!arr.is_array()) fail(ErrorCode::kConfig, "variable patterns must be an array");
  std::vector<VariablePatternSpec> out;
  for (const auto& p : arr) {
    if (p.is_string()) {
      out.push_back({p.get<std::string>(), ""});
    } else {
      out.push_back({p.at("pattern").get<std::string>(), p.value("label", "")});
    }
  }
  return out;
}

}  // namespace

TopicConfig config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::kConfig, "topic config must be an object");
  TopicConfig c = default_topic_config();
  try {
    c.tokenizer_pattern = j.value("tokenizer_pattern", c.tokenizer_pattern);
    if (j.contains("variable_patterns"))
      c.variable_patterns = patterns_from(j.at("variable_patterns"));
    if (j.contains("extra_variable_patterns")) {
      auto extra = patterns_from(j.at("extra_variable_patterns"));
      c.variable_patterns.insert(c.variable_patterns.end(), extra.begin(), extra.end());
    }
    c.prefix_k = j.value("prefix_k", c.prefix_k);
    c.training_volume_threshold =
        j.value("training_volume_threshold", c.training_volume_threshold);
    c.initial_training_volume =
        j.value("initial_training_volume", c.initial_training_volume);
    c.training_interval = std::chrono::seconds(
        j.value("training_interval_seconds", c.training_interval.count()));
    c.sample_cap = j.value("sample_cap", c.sample_cap);
    c.merge_similarity_threshold =
        j.value("merge_similarity_threshold", c.merge_similarity_threshold);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    if (j.contains("index_threshold") && !j.at("index_threshold").is_null())
      c.index_threshold = j.at("index_threshold").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad topic config: ") + e.what());
  }
  validate_config(c);
  return c;
}

TopicConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, path + ": " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t config_fingerprint(const TopicConfig& c) {
  json j = {{"tokenizer_pattern", c.tokenizer_pattern}, {"prefix_k", c.prefix_k}};
  json patterns = json::array();
  for (const auto& v : c.variable_patterns) patterns.push_back(v.pattern);
  j["variable_patterns"] = patterns;
  return bytes_hash(j.dump());
}

namespace {

struct Preset {
  const char* name;
  std::vector<const char*> patterns;
};

// Leftmost-longest matching turns lazy quantifiers greedy, so rules that
// relied on ".*?\s" use "\S+" instead.
const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = {
      {"HDFS", {R"(blk_-?\d+)", R"((\d+\.){3}\d+(:\d+)?)"}},
      {"Hadoop", {R"((\d+\.){3}\d+)"}},
      {"Spark", {R"((\d+\.){3}\d+)", R"(\b[KGTM]?B\b)", R"(([\w-]+\.){2,}[\w-]+)"}},
      {"Zookeeper", {R"((/|)(\d+\.){3}\d+(:\d+)?)"}},
      {"BGL", {R"(core\.\d+)"}},
      {"HPC", {R"(=\d+)"}},
      {"Thunderbird", {R"((\d+\.){3}\d+)"}},
      {"Windows", {R"(0x\S+)"}},
      {"Linux", {R"((\d+\.){3}\d+)", R"(\d{2}:\d{2}:\d{2})"}},
      {"Android",
       {R"((/[\w-]+)+)", R"(([\w-]+\.){2,}[\w-]+)",
        R"(\b(\-?\+?\d+)\b|\b0[Xx][a-fA-F\d]+\b|\b[a-fA-F\d]{4,}\b)"}},
      {"HealthApp", {}},
      {"Apache", {R"((\d+\.){3}\d+)"}},
      {"Proxifier",
       {R"(<\d+\ssec)", R"(([\w-]+\.)+[\w-]+(:\d+)?)", R"(\d{2}:\d{2}(:\d{2})*)",
        R"([KGTM]B)"}},
      {"OpenSSH", {R"((\d+\.){3}\d+)", R"(([\w-]+\.){2,}[\w-]+)"}},
      {"OpenStack", {R"(((\d+\.){3}\d+,?)+)", R"(/\S+)", R"(\d+)"}},
      {"Mac", {R"(([\w-]+\.){2,}[\w-]+)"}},
  };
  return table;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

}  // namespace

std::optional<TopicConfig> loghub_preset(std::string_view dataset) {
  for (const Preset& p : presets()) {
    if (!iequals(p.name, dataset)) continue;
    TopicConfig c = default_topic_config();
    int i = 0;
    for (const char* pattern : p.patterns)
      c.variable_patterns.push_back({pattern, std::string(p.name) + "-" + std::to_string(++i)});
    return c;
  }
  return std::nullopt;
}

std::vector<std::string> loghub_dataset_names() {
  std::vector<std::string> names;
  for (const Preset& p : presets()) names.emplace_back(p.name);
  return names;
}

TopicConfig synthetic_corpus_config() {
  TopicConfig c = default_topic_config();
  c.variable_patterns.push_back({R"(\b\d+\b)", "number"});
  return c;
}

}  // namespace satlog
