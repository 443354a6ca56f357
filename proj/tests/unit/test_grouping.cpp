#include <doctest.h>

#include <random>
#include <set>

#include "../support/fixtures.hpp"
#include "satlog/grouping.hpp"

using namespace satlog;
using testing::make_log;

TEST_CASE("group key is the length plus the first k hashes") {
  auto five = make_log({"a", "b", "c", "d", "e"});
  CHECK(group_key(five, 0) == GroupKey{5, {}});
  CHECK(group_key(five, 2).prefix == std::vector<TokenHash>{five.hashes[0], five.hashes[1]});
  CHECK(group_key(make_log({"a"}), 3).prefix.size() == 1);
}

TEST_CASE("different lengths never share a group") {
  for (std::uint32_t k : {0u, 1u, 5u})
    CHECK(group_key(make_log({"a", "b", "c"}), k) != group_key(make_log({"a", "b"}), k));
}

TEST_CASE("prefix hashes separate logs that differ inside the prefix") {
  CHECK(group_key(make_log({"a", "b", "c"}), 2) != group_key(make_log({"a", "x", "c"}), 2));
  CHECK(group_key(make_log({"a", "b", "c"}), 1) == group_key(make_log({"a", "x", "c"}), 1));
}

TEST_CASE("partition by length keeps first-seen order") {
  std::vector<EncodedLog> logs = {make_log({"a"}), make_log({"b", "c"}), make_log({"d"}),
                                  make_log({"e", "f", "g"})};
  auto groups = partition(logs, 0);
  REQUIRE(groups.size() == 3);
  const auto& ones = groups.at(GroupKey{1, {}});
  REQUIRE(ones.size() == 2);
  CHECK(ones[0].tokens[0] == "a");
  CHECK(ones[1].tokens[0] == "d");
  CHECK(partition({}, 0).empty());
}

TEST_CASE("partition is an exact cover that refines as k grows") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EncodedLog> logs;
    for (int c = 0; c < 4; ++c) {
      auto part = testing::random_corpus(rng, 15, 5);
      logs.insert(logs.end(), part.begin(), part.end());
    }
    for (std::uint32_t k = 0; k < 5; ++k) {
      auto coarse = partition_indices(logs, k);
      auto fine = partition_indices(logs, k + 1);
      std::size_t covered = 0;
      std::set<std::size_t> seen;
      for (const auto& [key, idx] : coarse) {
        covered += idx.size();
        seen.insert(idx.begin(), idx.end());
      }
      CHECK(covered == logs.size());
      CHECK(seen.size() == logs.size());
      // Every finer group sits inside one coarser group.
      for (const auto& [key, idx] : fine) {
        const GroupKey parent = group_key(logs[idx.front()], k);
        const auto& coarse_idx = coarse.at(parent);
        const std::set<std::size_t> c(coarse_idx.begin(), coarse_idx.end());
        for (std::size_t i : idx) CHECK(c.count(i) == 1);
      }
    }
  }
}
