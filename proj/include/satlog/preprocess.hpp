#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "satlog/types.hpp"

namespace satlog {

// The default delimiter rule. Tokenizer recognises this exact string and
// runs a hand-written scanner with identical split points.
inline constexpr std::string_view kDefaultTokenizerPattern =
    R"((?:://)|(?:(?:[\s\'\";=()\[\]{}?@&<>:\n\t\r,])|(?:[\.](\s+|$))|(?:\\[\"\']))+)";

/// Replaces invalid UTF-8 sequences with U+FFFD.
std::string sanitize_utf8(std::string_view raw);

class VariableReplacer {
 public:
  explicit VariableReplacer(const std::vector<VariablePatternSpec>& patterns);
  ~VariableReplacer();
  VariableReplacer(VariableReplacer&&) noexcept;
  VariableReplacer& operator=(VariableReplacer&&) noexcept;

  std::string apply(std::string_view raw) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class Tokenizer {
 public:
  // An empty pattern or kDefaultTokenizerPattern selects the built-in scanner.
  explicit Tokenizer(std::string_view pattern = {});
  ~Tokenizer();
  Tokenizer(Tokenizer&&) noexcept;
  Tokenizer& operator=(Tokenizer&&) noexcept;

  // Views into `line`; empty fragments are dropped.
  std::vector<std::string_view> split(std::string_view line) const;
  bool uses_builtin() const noexcept { return impl_ == nullptr; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits with the built-in default rule; no regex engine involved.
std::vector<std::string_view> split_default(std::string_view line);

std::string replace_variables(std::string_view raw,
                              const std::vector<VariablePatternSpec>& patterns);

/// Throws kInvalidInput when the line yields no tokens.
TokenSequence tokenize(std::string_view line, std::string_view tokenizer_pattern = {});

EncodedLog encode(const TokenSequence& tokens);

/// One entry per distinct hash vector, first-seen order, counts summed.
std::vector<EncodedLog> deduplicate(std::vector<EncodedLog> batch);

/// Birthday-bound probability of at least one collision among n distinct
/// 64-bit hashes: 1 - exp(-n(n-1) / 2^65).
double collision_probability(std::uint64_t n);

// Streaming dedup table; keeps first-seen order.
class Deduplicator {
 public:
  // Both return the entry's position in logs().
  std::size_t add(EncodedLog log);
  std::size_t add(const std::vector<TokenHash>& hashes,
                  std::span<const std::string_view> tokens, std::uint64_t count = 1);
  void merge(Deduplicator&& other);

  std::size_t unique_count() const noexcept { return logs_.size(); }
  std::uint64_t total_count() const noexcept { return total_; }
  const std::vector<EncodedLog>& logs() const noexcept { return logs_; }
  std::vector<EncodedLog> take();
  void clear();

 private:
  absl::flat_hash_map<std::vector<TokenHash>, std::size_t, HashVectorHasher> index_;
  std::vector<EncodedLog> logs_;
  std::uint64_t total_ = 0;
};

// Full line pipeline for one topic config: UTF-8 repair, variable
// replacement, tokenization and hash encoding.
class Preprocessor {
 public:
  explicit Preprocessor(const TopicConfig& config);

  // Returns nullopt for lines with no tokens (callers count and skip them).
  std::optional<EncodedLog> process(std::string_view raw) const;
  // Hash vector only; token texts are not materialised.
  bool hashes_of(std::string_view raw, std::vector<TokenHash>& out) const;
  // Replaced text, tokens as views into `scratch`.
  std::vector<std::string_view> tokens_of(std::string_view raw, std::string& scratch) const;

  struct BatchResult {
    std::vector<EncodedLog> unique;      // deduplicated, first-seen order
    std::vector<std::int64_t> line_to_unique;  // -1 for skipped lines
    std::uint64_t skipped = 0;
  };
  // Preprocess and deduplicate; partitions across `workers` threads.
  BatchResult process_batch(std::span<const std::string> lines, unsigned workers = 1) const;

 private:
  VariableReplacer replacer_;
  Tokenizer tokenizer_;
};

}  // namespace satlog
