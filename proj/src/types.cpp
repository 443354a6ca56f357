#include "satlog/types.hpp"

#include <string>

#include "satlog/error.hpp"

namespace satlog {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
// Substituted when a real token would otherwise hash to the wildcard value.
constexpr TokenHash kZeroRemap = 0x9e3779b97f4a7c15ULL;

}  // namespace

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid input";
    case ErrorCode::kNotFound: return "not found";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kCorruptModel: return "corrupt model";
    case ErrorCode::kIncompatibleModel: return "incompatible model";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t bytes_hash(std::string_view bytes) noexcept {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return mix64(h);
}

TokenHash token_hash_or_wildcard(std::string_view token) noexcept {
  if (token == kWildcardText) return kWildcardHash;
  TokenHash h = bytes_hash(token);
  return h == kWildcardHash ? kZeroRemap : h;
}

TokenHash token_hash(std::string_view token) {
  if (token.empty()) fail(ErrorCode::kInvalidInput, "token_hash: empty token");
  if (token == kWildcardText)
    fail(ErrorCode::kInvalidInput, "token_hash: \"*\" is the reserved wildcard");
  return token_hash_or_wildcard(token);
}

std::size_t HashVectorHasher::operator()(
    const std::vector<TokenHash>& v) const noexcept {
  std::uint64_t h = 0x2545f4914f6cdd1dULL ^ v.size();
  for (TokenHash t : v) h = mix64(h ^ t) + 0x9e3779b97f4a7c15ULL;
  return static_cast<std::size_t>(h);
}

Cell Cell::literal(std::string text) {
  Cell c;
  c.hash = token_hash_or_wildcard(text);
  c.text = c.hash == kWildcardHash ? std::string{} : std::move(text);
  return c;
}

std::size_t Template::wildcard_count() const noexcept {
  std::size_t n = 0;
  for (const Cell& c : cells) n += c.is_wildcard() ? 1 : 0;
  return n;
}

bool Template::matches(const std::vector<TokenHash>& hashes) const noexcept {
  if (hashes.size() != cells.size()) return false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].is_wildcard() && cells[i].hash != hashes[i]) return false;
  }
  return true;
}

std::string Template::raw_text() const {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ' ';
    out += cells[i].is_wildcard() ? std::string(kWildcardText) : cells[i].text;
  }
  return out;
}

const ClusterNode& ParseModel::node(NodeId id) const {
  auto it = nodes.find(id);
  if (it == nodes.end())
    fail(ErrorCode::kNotFound, "unknown node id " + std::to_string(id));
  return it->second;
}

ClusterNode& ParseModel::node(NodeId id) {
  auto it = nodes.find(id);
  if (it == nodes.end())
    fail(ErrorCode::kNotFound, "unknown node id " + std::to_string(id));
  return it->second;
}

}  // namespace satlog
