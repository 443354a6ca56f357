#include "satlog/grouping.hpp"

#include <algorithm>

#include "satlog/error.hpp"

namespace satlog {

GroupKey group_key(const std::vector<TokenHash>& hashes, std::uint32_t k) {
  if (hashes.empty()) fail(ErrorCode::kInvalidInput, "group_key: empty log");
  GroupKey key;
  key.length = static_cast<std::uint32_t>(hashes.size());
  std::size_t n = std::min<std::size_t>(k, hashes.size());
  key.prefix.assign(hashes.begin(), hashes.begin() + static_cast<std::ptrdiff_t>(n));
  return key;
}

GroupKey group_key(const EncodedLog& log, std::uint32_t k) {
  return group_key(log.hashes, k);
}

std::map<GroupKey, std::vector<std::size_t>> partition_indices(
    const std::vector<EncodedLog>& logs, std::uint32_t k) {
  std::map<GroupKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < logs.size(); ++i) groups[group_key(logs[i], k)].push_back(i);
  return groups;
}

std::map<GroupKey, std::vector<EncodedLog>> partition(std::vector<EncodedLog> logs,
                                                      std::uint32_t k) {
  std::map<GroupKey, std::vector<EncodedLog>> groups;
  for (auto& log : logs) {
    GroupKey key = group_key(log, k);
    groups[std::move(key)].push_back(std::move(log));
  }
  return groups;
}

}  // namespace satlog
