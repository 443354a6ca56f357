#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "../support/fixtures.hpp"
#include "satlog/clustering.hpp"
#include "satlog/config.hpp"
#include "satlog/error.hpp"
#include "satlog/evaluation.hpp"
#include "satlog/preprocess.hpp"

using namespace satlog;
using testing::make_log;

namespace {

ClusterStats stats_of(const std::vector<EncodedLog>& logs) {
  return ClusterStats::build(logs);
}

double sat(const std::vector<EncodedLog>& logs) { return saturation(stats_of(logs)); }

// Direct evaluation of the saturation formula from its definition, used to
// cross-check the library on random inputs.
double oracle_saturation(const std::vector<EncodedLog>& logs) {
  const std::size_t m = logs.front().size();
  std::set<std::vector<TokenHash>> unique;
  std::uint64_t n = 0;
  for (const auto& l : logs) {
    unique.insert(l.hashes);
    n += l.count;
  }
  const std::size_t u = unique.size();
  std::size_t resolved = 0;
  double fv = 1.0;
  bool any_unresolved = false;
  for (std::size_t i = 0; i < m; ++i) {
    std::set<TokenHash> distinct;
    for (const auto& v : unique) distinct.insert(v[i]);
    const std::size_t ni = distinct.size();
    if (ni == 1 || (ni == u && u >= 3)) {
      ++resolved;
    } else {
      any_unresolved = true;
      const double f = n > 1 ? std::clamp((std::log(double(ni)) - 1.0) / std::log(double(n)), 0.0, 1.0) : 0.0;
      fv = std::min(fv, f);
    }
  }
  const double fc = double(resolved) / double(m);
  if (!any_unresolved) return fc;
  const double exponent = std::max(0.0, double(m - resolved) - 1.0);
  const double pc = 1.0 / std::pow(2.0, exponent);
  return (fv * pc + (1.0 - pc)) * fc;
}

// Positions that are constant, or distinct in every unique log of three or
// more, counted straight from the token sets.
std::size_t oracle_resolved(const std::vector<EncodedLog>& logs) {
  std::set<std::vector<TokenHash>> unique;
  for (const auto& l : logs) unique.insert(l.hashes);
  std::size_t resolved = 0;
  for (std::size_t i = 0; i < logs.front().size(); ++i) {
    std::set<TokenHash> distinct;
    for (const auto& v : unique) distinct.insert(v[i]);
    resolved += distinct.size() == 1 || (distinct.size() == unique.size() && unique.size() >= 3);
  }
  return resolved;
}

std::vector<EncodedLog> dedup_sorted(const std::vector<EncodedLog>& logs) {
  return deduplicate(logs);
}

}  // namespace

TEST_CASE("cluster statistics count by multiplicity") {
  auto s = stats_of({make_log({"a", "b"}, 3)});
  CHECK(s.total() == 3);
  CHECK(s.distinct(0) == 1);
  CHECK(s.distinct(1) == 1);

  auto t = stats_of({make_log({"a", "b"}), make_log({"a", "c"})});
  CHECK(t.frequency(0, token_hash("a")) == 2);
  CHECK(t.distinct(1) == 2);
  CHECK(t.unique_count() == 2);

  CHECK_THROWS_AS(stats_of({make_log({"a"}), make_log({"a", "b"})}), Error);
}

TEST_CASE("statistics of a deduplicated batch equal those of the raw batch") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto logs = testing::random_corpus(rng);
    auto raw = stats_of(testing::expand(logs));
    auto dedup = stats_of(dedup_sorted(logs));
    REQUIRE(raw.total() == dedup.total());
    REQUIRE(raw.unique_count() == dedup.unique_count());
    for (std::size_t i = 0; i < raw.positions(); ++i) {
      CHECK(raw.frequencies(i) == dedup.frequencies(i));
      CHECK(raw.position_class(i) == dedup.position_class(i));
    }
  }
}

TEST_CASE("positional similarity examples") {
  auto single = stats_of({make_log({"a", "b", "x"})});
  CHECK(positional_similarity(make_log({"a", "b", "x"}), single) == 1.0);

  auto pair = stats_of({make_log({"a", "b", "x"}), make_log({"a", "b", "y"})});
  // Weights (2, 2, 1), frequencies (1, 1, 0.5).
  CHECK(positional_similarity(make_log({"a", "b", "x"}), pair) == doctest::Approx(0.9));
  CHECK(positional_similarity(make_log({"q", "r", "s"}), pair) == 0.0);
  CHECK_THROWS_AS(positional_similarity(make_log({"a", "b"}), pair), Error);
}

TEST_CASE("positional similarity stays in range and is 1 only on unanimous tokens") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    auto logs = testing::random_corpus(rng);
    auto s = stats_of(logs);
    for (const auto& l : logs) {
      const double v = positional_similarity(l, s);
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
      bool unanimous = true;
      for (std::size_t i = 0; i < s.positions(); ++i)
        unanimous = unanimous && s.frequency(i, l.hashes[i]) == s.total();
      CHECK((v == doctest::Approx(1.0)) == unanimous);
    }
  }
}

TEST_CASE("saturation examples") {
  CHECK(sat({make_log({"a", "b", "c"}, 4)}) == 1.0);
  // Three logs differing at one position with three distinct values.
  CHECK(sat({make_log({"a", "b", "x"}), make_log({"a", "b", "y"}), make_log({"a", "b", "z"})}) ==
        1.0);
  // pos0 constant, pos2 fully variable, pos1 unresolved with two values.
  CHECK(sat({make_log({"a", "b", "x"}), make_log({"a", "c", "y"}), make_log({"a", "b", "z"})}) ==
        0.0);
}

TEST_CASE("saturation matches a direct evaluation of its definition") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    auto logs = testing::random_corpus(rng);
    const double s = sat(logs);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(s == doctest::Approx(oracle_saturation(logs)).epsilon(1e-12));
    // Saturation is 1 exactly when no position is unresolved.
    auto st = stats_of(logs);
    bool resolved = true;
    for (auto c : classify(st)) resolved = resolved && c != PositionClass::kUnresolved;
    CHECK((s == 1.0) == resolved);
  }
}

TEST_CASE("duplicates never lower a log's frequencies or change constant positions") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    auto logs = testing::random_corpus(rng);
    auto before = stats_of(logs);
    const std::size_t pick = rng() % logs.size();
    auto more = logs;
    more.push_back(logs[pick]);
    auto after = stats_of(more);
    for (std::size_t i = 0; i < before.positions(); ++i) {
      const TokenHash h = logs[pick].hashes[i];
      const double fb = double(before.frequency(i, h)) / double(before.total());
      const double fa = double(after.frequency(i, h)) / double(after.total());
      CHECK(fa >= fb - 1e-15);
      if (before.position_class(i) == PositionClass::kConstant)
        CHECK(after.position_class(i) == PositionClass::kConstant);
    }
  }
}

TEST_CASE("template_of keeps constant positions and masks the rest") {
  auto one = template_of(stats_of({make_log({"release", "lock", "7"})}));
  CHECK(one.raw_text() == "release lock 7");
  auto two = template_of(
      stats_of({make_log({"release", "lock", "L1"}), make_log({"release", "lock", "L2"})}));
  CHECK(two.raw_text() == "release lock *");
  auto none = template_of(stats_of({make_log({"a", "b"}), make_log({"c", "d"})}));
  CHECK(none.wildcard_count() == 2);
}

TEST_CASE("early stop examples") {
  auto two = std::vector<EncodedLog>{make_log({"a", "x"}), make_log({"a", "y"})};
  auto p = early_stop(stats_of(two), two);
  REQUIRE(p);
  CHECK(p->size() == 2);

  // One unresolved position with two values carried by at most two logs.
  auto one_unresolved = std::vector<EncodedLog>{make_log({"a", "b", "x"}), make_log({"a", "c", "y"}),
                                                make_log({"a", "b", "z"})};
  p = early_stop(stats_of(one_unresolved), one_unresolved);
  REQUIRE(p);
  CHECK(p->size() == 3);

  // Three positions each with three distinct tokens among three logs.
  auto distinct = std::vector<EncodedLog>{make_log({"a", "b", "c"}), make_log({"d", "e", "f"}),
                                          make_log({"g", "h", "i"})};
  p = early_stop(stats_of(distinct), distinct);
  REQUIRE(p);
  CHECK(p->size() == 3);
  for (const auto& part : *p) CHECK(part.size() == 1);

  // Two unresolved positions with shared values: clustering must continue.
  auto open = std::vector<EncodedLog>{make_log({"a", "b", "x"}), make_log({"a", "b", "y"}),
                                      make_log({"c", "d", "z"}), make_log({"c", "d", "w"})};
  CHECK_FALSE(early_stop(stats_of(open), open).has_value());
}

// When early stop fires, exhaustive recursion must also end in single logs:
// no proper subset of three or more logs may reach saturation 1 through a
// strictly increasing chain from the parent. With at most four unique logs
// that chain is a single step.
namespace {

// Returns how many fixtures triggered early stop; fails on any violation.
std::size_t check_early_stop(const std::vector<EncodedLog>& logs) {
  const auto root_stats = stats_of(logs);
  const double root_sat = saturation(root_stats);
  if (root_sat == 1.0) return 0;  // a saturated root is never split
  if (!early_stop(root_stats, logs)) return 0;
  for (unsigned mask = 0; mask < (1u << logs.size()); ++mask) {
    const auto size = static_cast<std::size_t>(__builtin_popcount(mask));
    if (size < 3 || size == logs.size()) continue;
    std::vector<EncodedLog> subset;
    for (std::size_t i = 0; i < logs.size(); ++i)
      if (mask & (1u << i)) subset.push_back(logs[i]);
    const double s = sat(subset);
    if (s == 1.0 && s > root_sat) {
      std::string text;
      for (const auto& l : logs) {
        text += "[";
        for (const auto& t : l.tokens) text += t + " ";
        text += "]";
      }
      FAIL_CHECK("early stop fired on " << text << " but subset " << mask << " resolves");
    }
  }
  return 1;
}

}  // namespace

TEST_CASE("early stop agrees with exhaustive search on every small fixture") {
  // Every set of 3 or 4 distinct logs over up to 3 positions with 3 values
  // each, first with unit counts and then with counts drawn per log.
  std::mt19937_64 rng(99);
  std::size_t fixtures = 0, fired = 0;
  for (std::size_t m = 1; m <= 3; ++m) {
    std::vector<std::vector<std::string>> space;
    std::size_t total = 1;
    for (std::size_t p = 0; p < m; ++p) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<std::string> tokens;
      std::size_t c = code;
      for (std::size_t p = 0; p < m; ++p, c /= 3)
        tokens.push_back("p" + std::to_string(p) + "v" + std::to_string(c % 3));
      space.push_back(tokens);
    }
    auto run = [&](const std::vector<std::size_t>& pick) {
      for (int weighted = 0; weighted < 2; ++weighted) {
        std::vector<EncodedLog> logs;
        for (std::size_t i : pick) logs.push_back(make_log(space[i], weighted ? 1 + rng() % 4 : 1));
        ++fixtures;
        fired += check_early_stop(logs);
      }
    };
    const std::size_t n = space.size();
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        for (std::size_t c = b + 1; c < n; ++c) {
          run({a, b, c});
          for (std::size_t d = c + 1; d < n; ++d) run({a, b, c, d});
        }
  }
  CHECK(fixtures == 2 * (1 + (84 + 126) + (2925 + 17550)));
  CHECK(fired > 100);
}

TEST_CASE("cluster_once separates two unrelated families") {
  std::vector<EncodedLog> logs = {
      make_log({"a", "b", "x1"}), make_log({"p", "q", "y1"}), make_log({"a", "b", "x2"}),
      make_log({"p", "q", "y2"}), make_log({"a", "b", "x3"}), make_log({"p", "q", "y3"})};
  const double parent = sat(logs);
  REQUIRE_FALSE(early_stop(stats_of(logs), logs).has_value());

  // Brute-force reference: each log's most similar family.
  std::vector<EncodedLog> fam_a = {logs[0], logs[2], logs[4]};
  std::vector<EncodedLog> fam_b = {logs[1], logs[3], logs[5]};
  auto sa = stats_of(fam_a), sb = stats_of(fam_b);
  std::set<std::size_t> expect_a, expect_b;
  for (std::size_t i = 0; i < logs.size(); ++i)
    (positional_similarity(logs[i], sa) > positional_similarity(logs[i], sb) ? expect_a : expect_b)
        .insert(i);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto parts = cluster_once(logs, parent, rng);
    REQUIRE(parts.size() == 2);
    std::set<std::size_t> p0(parts[0].begin(), parts[0].end());
    std::set<std::size_t> p1(parts[1].begin(), parts[1].end());
    CHECK(((p0 == expect_a && p1 == expect_b) || (p0 == expect_b && p1 == expect_a)));
    for (const auto& part : parts) {
      std::vector<EncodedLog> sub;
      for (std::size_t i : part) sub.push_back(logs[i]);
      CHECK(sat(sub) > parent);
    }
  }
}

TEST_CASE("cluster_once is reproducible under a fixed seed") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto logs = dedup_sorted(testing::random_corpus(gen));
    auto st = stats_of(logs);
    if (saturation(st) == 1.0 || early_stop(st, logs)) continue;
    std::mt19937_64 a(trial), b(trial);
    CHECK(cluster_once(logs, saturation(st), a) == cluster_once(logs, saturation(st), b));
  }
}

TEST_CASE("build_tree leaves a saturated group as a single root") {
  std::mt19937_64 rng(1);
  auto one = build_tree({make_log({"a", "b"}, 2)}, rng);
  REQUIRE(one.nodes.size() == 1);
  CHECK(one.nodes[0].saturation == 1.0);
  CHECK(one.nodes[0].log_count == 2);

  auto set1 = build_tree({make_log({"a", "b", "x"}), make_log({"a", "b", "y"}),
                          make_log({"a", "b", "z"})},
                         rng);
  REQUIRE(set1.nodes.size() == 1);
  CHECK(set1.nodes[0].tmpl.raw_text() == "a b *");
}

TEST_CASE("build_tree splits a mixed group down to single logs") {
  std::mt19937_64 rng(1);
  auto tree = build_tree({make_log({"a", "b", "x"}), make_log({"a", "c", "y"}),
                          make_log({"a", "b", "z"})},
                         rng);
  CHECK(tree.nodes[0].saturation < 1.0);
  std::size_t leaves = 0;
  for (const auto& n : tree.nodes) {
    if (!n.children.empty()) continue;
    ++leaves;
    CHECK(n.saturation == 1.0);
    CHECK(n.tmpl.wildcard_count() == 0);
  }
  CHECK(leaves == 3);
}

TEST_CASE("every tree edge strictly increases saturation") {
  std::mt19937_64 gen(2024);
  for (int corpus = 0; corpus < 1000; ++corpus) {
    auto logs = testing::random_corpus(gen, 60, 6);
    const std::size_t m = logs.front().size();
    std::mt19937_64 rng(corpus);
    auto tree = build_tree(logs, rng);
    std::uint64_t total = 0;
    for (const auto& l : logs) total += l.count;
    REQUIRE(tree.nodes[0].log_count == total);
    REQUIRE(tree.leaf_of_log.size() == tree.logs.size());
    std::vector<std::size_t> depth(tree.nodes.size(), 0);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& n = tree.nodes[i];
      if (n.parent) {
        REQUIRE(*n.parent < i);
        depth[i] = depth[*n.parent] + 1;
        INFO("corpus " << corpus << " node " << i);
        CHECK(n.saturation > tree.nodes[*n.parent].saturation);
      }
      if (!n.children.empty()) {
        std::uint64_t sum = 0;
        for (std::size_t c : n.children) sum += tree.nodes[c].log_count;
        CHECK(sum == n.log_count);
      }
    }
    CHECK(*std::max_element(depth.begin(), depth.end()) <= 2 * m + 1);
    std::vector<std::vector<EncodedLog>> members(tree.nodes.size());
    for (std::size_t i = 0; i < tree.logs.size(); ++i) {
      const auto& leaf = tree.nodes[tree.leaf_of_log[i]];
      CHECK(leaf.children.empty());
      CHECK(leaf.tmpl.matches(tree.logs[i].hashes));
      for (std::optional<std::size_t> n = tree.leaf_of_log[i]; n; n = tree.nodes[*n].parent)
        members[*n].push_back(tree.logs[i]);
    }
    // Each split classifies at least one more position, and no branch is
    // cut short by the depth cap.
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      CHECK_FALSE(tree.nodes[i].depth_capped);
      if (const auto p = tree.nodes[i].parent) {
        INFO("corpus " << corpus << " node " << i);
        CHECK(oracle_resolved(members[i]) > oracle_resolved(members[*p]));
      }
    }
  }
}

// One event type whose host field repeats over 50 values: the leaves must
// settle on hosts instead of dissolving into single logs. A host carried by
// three or more logs is resolved on its own (the job id is then distinct in
// every log); any leaf must resolve every position.
TEST_CASE("a repeated low-cardinality field yields per-value leaves") {
  std::mt19937_64 gen(11);
  std::vector<std::string> lines;
  for (int i = 0; i < 400; ++i)
    lines.push_back("alpha started job " + std::to_string(gen() % 1000000) + " on host h" +
                    std::to_string(gen() % 50));
  auto logs = testing::encode_lines(lines);
  std::mt19937_64 rng(5);
  auto tree = build_tree(logs, rng);
  std::size_t leaves = 0;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    CHECK_FALSE(n.depth_capped);
    if (!n.children.empty()) continue;
    ++leaves;
    CHECK(n.saturation == 1.0);
  }
  CHECK(leaves <= 100);
}

// Two word fields over ten values each, taken from the generated corpus:
// trimming logs off the cluster raises the formula slightly without
// resolving anything, which must not drive a chain of tiny splits.
TEST_CASE("trimming logs without resolving a position is not a split") {
  auto corpus = generate_corpus(5000, 1);
  Preprocessor pre(synthetic_corpus_config());
  std::vector<EncodedLog> logs;
  for (auto& l : pre.process_batch(corpus.lines).unique)
    if (l.size() == 8 && l.tokens[0] == "user" && l.tokens[2] == "updated") logs.push_back(l);
  REQUIRE(logs.size() >= 40);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    INFO("seed " << seed);
    std::mt19937_64 rng(seed);
    auto tree = build_tree(logs, rng);
    std::vector<std::vector<EncodedLog>> members(tree.nodes.size());
    for (std::size_t i = 0; i < tree.logs.size(); ++i)
      for (std::optional<std::size_t> n = tree.leaf_of_log[i]; n; n = tree.nodes[*n].parent)
        members[*n].push_back(tree.logs[i]);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      CHECK_FALSE(tree.nodes[i].depth_capped);
      if (const auto p = tree.nodes[i].parent)
        CHECK(oracle_resolved(members[i]) > oracle_resolved(members[*p]));
    }
  }
}

TEST_CASE("deduplicated and expanded input build the same tree") {
  std::mt19937_64 gen(77);
  for (int corpus = 0; corpus < 300; ++corpus) {
    auto logs = testing::random_corpus(gen, 40, 5);
    std::mt19937_64 r1(corpus), r2(corpus);
    auto a = build_tree(dedup_sorted(logs), r1);
    auto b = build_tree(testing::expand(logs), r2);
    REQUIRE(a.nodes.size() == b.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
      CHECK(a.nodes[i].tmpl == b.nodes[i].tmpl);
      CHECK(a.nodes[i].saturation == b.nodes[i].saturation);
      CHECK(a.nodes[i].log_count == b.nodes[i].log_count);
      CHECK(a.nodes[i].parent == b.nodes[i].parent);
    }
  }
}
