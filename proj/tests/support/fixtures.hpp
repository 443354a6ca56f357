#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "satlog/types.hpp"

namespace satlog::testing {

// Android power-manager style lines: "release|acquire lock=N flg|flags=0xH
// tag=T name=NAME ws=WS uid=U pid=P". Four (name, ws) kinds per verb:
// (android, WorkSource), (android, null), (audioserver, null) and
// (system_server, null). Lock ids are effectively unique; tag, uid and pid
// repeat at high cardinality.
std::vector<std::string> android_lock_lines(std::size_t n, std::uint64_t seed);

// Encodes raw lines under the default config; empty lines are dropped.
std::vector<EncodedLog> encode_lines(const std::vector<std::string>& lines);

// Builds an EncodedLog straight from tokens (texts hashed as-is).
EncodedLog make_log(const std::vector<std::string>& tokens, std::uint64_t count = 1);

// Random fixed-length corpus over a small vocabulary per position, with
// duplicates. Sized for property tests.
std::vector<EncodedLog> random_corpus(std::mt19937_64& rng, std::size_t max_logs = 40,
                                      std::size_t max_len = 6);

// Duplicate-expanded copy: every log repeated `count` times with count 1.
std::vector<EncodedLog> expand(const std::vector<EncodedLog>& logs);

}  // namespace satlog::testing
