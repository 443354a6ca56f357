#pragma once

#include <map>
#include <vector>

#include "satlog/types.hpp"

namespace satlog {

/// (token count, first min(k, length) token hashes).
GroupKey group_key(const std::vector<TokenHash>& hashes, std::uint32_t k);
GroupKey group_key(const EncodedLog& log, std::uint32_t k);

/// Disjoint cover of `logs` keyed by GroupKey; within-group order is
/// first-seen.
std::map<GroupKey, std::vector<EncodedLog>> partition(std::vector<EncodedLog> logs,
                                                      std::uint32_t k);

// Same partition expressed as indices into `logs`.
std::map<GroupKey, std::vector<std::size_t>> partition_indices(
    const std::vector<EncodedLog>& logs, std::uint32_t k);

}  // namespace satlog
