#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "satlog/types.hpp"

namespace satlog {

// Built-in variable patterns: timestamps, UUIDs, MD5 digests, IPv4
// addresses with an optional port, and 0x-prefixed hex literals.
const std::vector<VariablePatternSpec>& default_variable_patterns();

/// Default config with the built-in variable patterns installed.
TopicConfig default_topic_config();

/// Rejects constructs that defeat linear-time matching (lookaround,
/// backreferences, conditionals, recursion). Throws kConfig.
void check_pattern_complexity(std::string_view pattern);

/// Validates thresholds and compiles every pattern once. Throws kConfig.
void validate_config(const TopicConfig& config);

nlohmann::json config_to_json(const TopicConfig& config);
TopicConfig config_from_json(const nlohmann::json& j);
TopicConfig load_config_file(const std::string& path);

// Fingerprint over the fields that change how logs are encoded. Training
// cadence knobs are excluded so retuning them keeps models compatible.
std::uint64_t config_fingerprint(const TopicConfig& config);

/// Default config plus the masking rules customarily used for one LogHub
/// dataset (matched case-insensitively by name, e.g. "HDFS"). nullopt for
/// unknown names.
std::optional<TopicConfig> loghub_preset(std::string_view dataset);
std::vector<std::string> loghub_dataset_names();

/// Default config plus a standalone-number rule; used with generate_corpus.
TopicConfig synthetic_corpus_config();

}  // namespace satlog
