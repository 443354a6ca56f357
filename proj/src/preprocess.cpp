#include "satlog/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <boost/regex.hpp>

#include "satlog/config.hpp"
#include "satlog/error.hpp"

namespace satlog {

// ---------------------------------------------------------------------------
// UTF-8 repair

std::string sanitize_utf8(std::string_view in) {
  static constexpr std::string_view kReplacement = "\xEF\xBF\xBD";
  // Fast path: pure ASCII is always valid.
  if (std::all_of(in.begin(), in.end(),
                  [](char c) { return static_cast<unsigned char>(c) < 0x80; }))
    return std::string(in);

  std::string out;
  out.reserve(in.size() + 8);
  std::size_t i = 0;
  const std::size_t n = in.size();
  auto byte = [&](std::size_t k) { return static_cast<unsigned char>(in[k]); };
  auto cont = [&](std::size_t k) { return k < n && (byte(k) & 0xC0) == 0x80; };
  while (i < n) {
    unsigned char c = byte(i);
    std::size_t len = 0;
    if (c < 0x80) {
      len = 1;
    } else if (c >= 0xC2 && c <= 0xDF) {
      len = cont(i + 1) ? 2 : 0;
    } else if (c >= 0xE0 && c <= 0xEF) {
      if (cont(i + 1) && cont(i + 2)) {
        unsigned char c1 = byte(i + 1);
        bool overlong = c == 0xE0 && c1 < 0xA0;
        bool surrogate = c == 0xED && c1 >= 0xA0;
        len = (overlong || surrogate) ? 0 : 3;
      }
    } else if (c >= 0xF0 && c <= 0xF4) {
      if (cont(i + 1) && cont(i + 2) && cont(i + 3)) {
        unsigned char c1 = byte(i + 1);
        bool overlong = c == 0xF0 && c1 < 0x90;
        bool too_big = c == 0xF4 && c1 >= 0x90;
        len = (overlong || too_big) ? 0 : 4;
      }
    }
    if (len == 0) {
      out += kReplacement;
      ++i;
    } else {
      out.append(in.substr(i, len));
      i += len;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Variable replacement

struct VariableReplacer::Impl {
  std::vector<boost::regex> patterns;
};

VariableReplacer::VariableReplacer(const std::vector<VariablePatternSpec>& patterns)
    : impl_(std::make_unique<Impl>()) {
  for (const auto& p : patterns) {
    check_pattern_complexity(p.pattern);
    try {
      impl_->patterns.emplace_back(p.pattern, boost::regex::perl | boost::regex::optimize);
    } catch (const boost::regex_error& e) {
      fail(ErrorCode::kConfig, "invalid variable pattern '" + p.pattern + "': " + e.what());
    }
  }
}

VariableReplacer::~VariableReplacer() = default;
VariableReplacer::VariableReplacer(VariableReplacer&&) noexcept = default;
VariableReplacer& VariableReplacer::operator=(VariableReplacer&&) noexcept = default;

std::string VariableReplacer::apply(std::string_view raw) const {
  std::string text(raw);
  std::string next;
  for (const auto& re : impl_->patterns) {
    boost::match_results<std::string::const_iterator> m;
    auto begin = text.cbegin();
    if (!boost::regex_search(begin, text.cend(), m, re, boost::match_posix)) continue;
    next.clear();
    next.reserve(text.size());
    auto cursor = text.cbegin();
    while (true) {
      next.append(cursor, m[0].first);
      if (m[0].length() == 0) {
        // Empty matches replace nothing; step one byte to make progress.
        if (m[0].second == text.cend()) {
          cursor = m[0].second;
          break;
        }
        next.push_back(*m[0].second);
        cursor = m[0].second + 1;
      } else {
        next += kWildcardText;
        cursor = m[0].second;
      }
      if (cursor == text.cend() ||
          !boost::regex_search(cursor, text.cend(), m, re,
                               boost::match_posix | boost::match_prev_avail))
        break;
    }
    next.append(cursor, text.cend());
    text.swap(next);
  }
  return text;
}

std::string replace_variables(std::string_view raw,
                              const std::vector<VariablePatternSpec>& patterns) {
  return VariableReplacer(patterns).apply(raw);
}

// ---------------------------------------------------------------------------
// Tokenization

namespace {

constexpr bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

constexpr bool is_delim_char(char c) noexcept {
  switch (c) {
    case '\'': case '"': case ';': case '=': case '(': case ')': case '[':
    case ']': case '{': case '}': case '?': case '@': case '&': case '<':
    case '>': case ':': case ',':
      return true;
    default:
      return is_space(c);
  }
}

// Length of one repetition of the delimiter-run alternative at `q`, 0 if none.
std::size_t run_piece(std::string_view s, std::size_t q) noexcept {
  char c = s[q];
  if (is_delim_char(c)) return 1;
  if (c == '.') {
    if (q + 1 == s.size()) return 1;
    if (is_space(s[q + 1])) {
      std::size_t k = q + 1;
      while (k < s.size() && is_space(s[k])) ++k;
      return k - q;
    }
    return 0;
  }
  if (c == '\\' && q + 1 < s.size() && (s[q + 1] == '"' || s[q + 1] == '\''))
    return 2;
  return 0;
}

}  // namespace

std::vector<std::string_view> split_default(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t token_start = 0;
  std::size_t p = 0;
  const std::size_t n = s.size();
  while (p < n) {
    std::size_t match_end = p;
    if (s.compare(p, 3, "://") == 0) {
      match_end = p + 3;
    } else {
      std::size_t len;
      while (match_end < n && (len = run_piece(s, match_end)) > 0) match_end += len;
    }
    if (match_end == p) {
      ++p;
      continue;
    }
    if (p > token_start) out.push_back(s.substr(token_start, p - token_start));
    p = match_end;
    token_start = p;
  }
  if (n > token_start) out.push_back(s.substr(token_start));
  return out;
}

struct Tokenizer::Impl {
  boost::regex delimiter;
};

Tokenizer::Tokenizer(std::string_view pattern) {
  if (pattern.empty() || pattern == kDefaultTokenizerPattern) return;
  check_pattern_complexity(pattern);
  impl_ = std::make_unique<Impl>();
  try {
    impl_->delimiter = boost::regex(pattern.begin(), pattern.end(),
                                    boost::regex::perl | boost::regex::optimize);
  } catch (const boost::regex_error& e) {
    fail(ErrorCode::kConfig,
         "invalid tokenizer pattern '" + std::string(pattern) + "': " + e.what());
  }
}

Tokenizer::~Tokenizer() = default;
Tokenizer::Tokenizer(Tokenizer&&) noexcept = default;
Tokenizer& Tokenizer::operator=(Tokenizer&&) noexcept = default;

std::vector<std::string_view> Tokenizer::split(std::string_view line) const {
  if (!impl_) return split_default(line);
  std::vector<std::string_view> out;
  std::size_t token_start = 0;
  boost::cregex_iterator it(line.data(), line.data() + line.size(), impl_->delimiter);
  for (; it != boost::cregex_iterator(); ++it) {
    const auto& m = (*it)[0];
    if (m.length() == 0) continue;
    std::size_t begin = static_cast<std::size_t>(m.first - line.data());
    if (begin > token_start) out.push_back(line.substr(token_start, begin - token_start));
    token_start = static_cast<std::size_t>(m.second - line.data());
  }
  if (line.size() > token_start) out.push_back(line.substr(token_start));
  return out;
}

TokenSequence tokenize(std::string_view line, std::string_view tokenizer_pattern) {
  Tokenizer tok(tokenizer_pattern);
  auto views = tok.split(line);
  if (views.empty()) fail(ErrorCode::kInvalidInput, "line has no tokens");
  return TokenSequence(views.begin(), views.end());
}

// ---------------------------------------------------------------------------
// Encoding and dedup

EncodedLog encode(const TokenSequence& tokens) {
  EncodedLog log;
  log.hashes.reserve(tokens.size());
  for (const auto& t : tokens) log.hashes.push_back(token_hash_or_wildcard(t));
  log.tokens = tokens;
  log.count = 1;
  return log;
}

std::size_t Deduplicator::add(EncodedLog log) {
  total_ += log.count;
  auto [it, inserted] = index_.try_emplace(log.hashes, logs_.size());
  if (inserted) {
    logs_.push_back(std::move(log));
  } else {
    logs_[it->second].count += log.count;
  }
  return it->second;
}

std::size_t Deduplicator::add(const std::vector<TokenHash>& hashes,
                              std::span<const std::string_view> tokens,
                              std::uint64_t count) {
  total_ += count;
  auto [it, inserted] = index_.try_emplace(hashes, logs_.size());
  if (inserted) {
    EncodedLog log;
    log.hashes = hashes;
    log.tokens.assign(tokens.begin(), tokens.end());
    log.count = count;
    logs_.push_back(std::move(log));
  } else {
    logs_[it->second].count += count;
  }
  return it->second;
}

void Deduplicator::merge(Deduplicator&& other) {
  for (auto& log : other.logs_) add(std::move(log));
  other.clear();
}

std::vector<EncodedLog> Deduplicator::take() {
  std::vector<EncodedLog> out = std::move(logs_);
  clear();
  return out;
}

void Deduplicator::clear() {
  index_.clear();
  logs_.clear();
  total_ = 0;
}

std::vector<EncodedLog> deduplicate(std::vector<EncodedLog> batch) {
  Deduplicator d;
  for (auto& log : batch) d.add(std::move(log));
  return d.take();
}

double collision_probability(std::uint64_t n) {
  if (n == 0) fail(ErrorCode::kInvalidInput, "collision_probability: n must be >= 1");
  const long double nn = static_cast<long double>(n);
  const long double exponent = nn * (nn - 1.0L) / std::ldexp(1.0L, 65);
  return static_cast<double>(-std::expm1(-exponent));
}

// ---------------------------------------------------------------------------
// Pipeline

Preprocessor::Preprocessor(const TopicConfig& config)
    : replacer_(config.variable_patterns), tokenizer_(config.tokenizer_pattern) {}

std::vector<std::string_view> Preprocessor::tokens_of(std::string_view raw,
                                                      std::string& scratch) const {
  scratch = replacer_.apply(sanitize_utf8(raw));
  return tokenizer_.split(scratch);
}

std::optional<EncodedLog> Preprocessor::process(std::string_view raw) const {
  std::string scratch;
  auto views = tokens_of(raw, scratch);
  if (views.empty()) return std::nullopt;
  EncodedLog log;
  log.hashes.reserve(views.size());
  log.tokens.reserve(views.size());
  for (auto v : views) {
    log.hashes.push_back(token_hash_or_wildcard(v));
    log.tokens.emplace_back(v);
  }
  return log;
}

bool Preprocessor::hashes_of(std::string_view raw, std::vector<TokenHash>& out) const {
  std::string scratch;
  auto views = tokens_of(raw, scratch);
  out.clear();
  for (auto v : views) out.push_back(token_hash_or_wildcard(v));
  return !out.empty();
}

namespace {

struct PartialBatch {
  Deduplicator dedup;
  std::vector<std::int64_t> line_to_local;
  std::uint64_t skipped = 0;
};

void process_range(const Preprocessor& pre, std::span<const std::string> lines,
                   PartialBatch& out) {
  std::string scratch;
  std::vector<TokenHash> hashes;
  out.line_to_local.reserve(lines.size());
  for (const auto& line : lines) {
    auto views = pre.tokens_of(line, scratch);
    if (views.empty()) {
      ++out.skipped;
      out.line_to_local.push_back(-1);
      continue;
    }
    hashes.clear();
    for (auto v : views) hashes.push_back(token_hash_or_wildcard(v));
    out.line_to_local.push_back(static_cast<std::int64_t>(out.dedup.add(hashes, views)));
  }
}

}  // namespace

Preprocessor::BatchResult Preprocessor::process_batch(std::span<const std::string> lines,
                                                      unsigned workers) const {
  workers = std::max(1u, std::min<unsigned>(workers, lines.size() / 4096 + 1));
  std::vector<PartialBatch> parts(workers);
  const std::size_t chunk = (lines.size() + workers - 1) / workers;
  auto range = [&](unsigned w) {
    std::size_t b = std::min(lines.size(), w * chunk);
    std::size_t e = std::min(lines.size(), b + chunk);
    return lines.subspan(b, e - b);
  };
  if (workers == 1) {
    process_range(*this, lines, parts[0]);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w)
      threads.emplace_back([&, w] { process_range(*this, range(w), parts[w]); });
    for (auto& t : threads) t.join();
  }

  BatchResult result;
  if (workers == 1) {
    result.skipped = parts[0].skipped;
    result.unique = parts[0].dedup.take();
    result.line_to_unique = std::move(parts[0].line_to_local);
    return result;
  }
  // Merge partitions in order so first-seen order matches a serial run.
  absl::flat_hash_map<std::vector<TokenHash>, std::size_t, HashVectorHasher> global;
  result.line_to_unique.reserve(lines.size());
  for (unsigned w = 0; w < workers; ++w) {
    auto& part = parts[w];
    result.skipped += part.skipped;
    std::vector<std::int64_t> local_to_global(part.dedup.unique_count(), -1);
    auto local_logs = part.dedup.take();
    for (std::size_t i = 0; i < local_logs.size(); ++i) {
      auto [it, inserted] = global.try_emplace(local_logs[i].hashes, result.unique.size());
      if (inserted) {
        result.unique.push_back(std::move(local_logs[i]));
      } else {
        result.unique[it->second].count += local_logs[i].count;
      }
      local_to_global[i] = static_cast<std::int64_t>(it->second);
    }
    for (std::int64_t local : part.line_to_local) {
      result.line_to_unique.push_back(
          local < 0 ? -1 : local_to_global[static_cast<std::size_t>(local)]);
    }
  }
  return result;
}

}  // namespace satlog
