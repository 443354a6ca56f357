#include "fixtures.hpp"

#include <cstdio>

#include "satlog/config.hpp"
#include "satlog/preprocess.hpp"

namespace satlog::testing {

std::vector<std::string> android_lock_lines(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  static const char* const kNames[] = {"android", "android", "audioserver", "system_server"};
  std::vector<std::string> lines;
  lines.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool release = rng() % 2 == 0;
    const std::size_t kind = rng() % 4;
    const char* ws = kind == 0 ? "WorkSource" : "null";
    const auto lock = rng() % 300000000;
    const auto flags = rng() % 16;
    const auto tag = rng() % 500;
    const auto uid = 10000 + rng() % 300;
    const auto pid = rng() % 3000;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s lock=%llu %s=0x%llx tag=T%llu name=%s ws=%s uid=%llu pid=%llu",
                  release ? "release" : "acquire", static_cast<unsigned long long>(lock),
                  release ? "flg" : "flags", static_cast<unsigned long long>(flags),
                  static_cast<unsigned long long>(tag), kNames[kind], ws,
                  static_cast<unsigned long long>(uid), static_cast<unsigned long long>(pid));
    lines.emplace_back(buf);
  }
  return lines;
}

std::vector<EncodedLog> encode_lines(const std::vector<std::string>& lines) {
  Preprocessor pre(default_topic_config());
  std::vector<EncodedLog> out;
  for (const auto& l : lines) {
    if (auto e = pre.process(l)) out.push_back(std::move(*e));
  }
  return out;
}

EncodedLog make_log(const std::vector<std::string>& tokens, std::uint64_t count) {
  EncodedLog log;
  log.tokens = tokens;
  for (const auto& t : tokens) log.hashes.push_back(token_hash_or_wildcard(t));
  log.count = count;
  return log;
}

std::vector<EncodedLog> random_corpus(std::mt19937_64& rng, std::size_t max_logs,
                                      std::size_t max_len) {
  const std::size_t len = 1 + rng() % max_len;
  const std::size_t n = 1 + rng() % max_logs;
  // Per-position vocabulary size between 1 and 8, so constants, low- and
  // high-cardinality positions all occur.
  std::vector<std::size_t> vocab(len);
  for (auto& v : vocab) v = 1 + rng() % 8;
  std::vector<EncodedLog> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> tokens;
    for (std::size_t p = 0; p < len; ++p)
      tokens.push_back("p" + std::to_string(p) + "v" + std::to_string(rng() % vocab[p]));
    out.push_back(make_log(tokens, 1 + rng() % 3));
  }
  return out;
}

std::vector<EncodedLog> expand(const std::vector<EncodedLog>& logs) {
  std::vector<EncodedLog> out;
  for (const auto& l : logs) {
    for (std::uint64_t c = 0; c < l.count; ++c) {
      EncodedLog one = l;
      one.count = 1;
      out.push_back(std::move(one));
    }
  }
  return out;
}

}  // namespace satlog::testing
