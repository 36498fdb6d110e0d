#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "omnitree/core.hpp"
#include "support.hpp"

using namespace omnitree;
using omnitree::testing::random_tree;
using omnitree::testing::sample_tree_2d;

TEST_CASE("singleton trees", "[core]") {
  const auto t3 = singleton_tree(3);
  CHECK(t3.node_count() == 1);
  CHECK(t3.leaf_count() == 1);
  CHECK(t3.label(0) == 0);

  const auto t1 = singleton_tree(1);
  CHECK(t1.labels() == std::vector<Label>{0});

  const auto t6 = singleton_tree(6);
  CHECK(t6.node_count() == 1);

  CHECK_THROWS_AS(singleton_tree(0), std::invalid_argument);
}

TEST_CASE("tree validation rejects malformed label sequences", "[core]") {
  // Too few labels: the nonleaf expects two children.
  CHECK_THROWS_AS(Omnitree(2, {label_from_string("10"), 0}), std::invalid_argument);
  // Too many labels.
  CHECK_THROWS_AS(Omnitree(2, {0, 0}), std::invalid_argument);
  // Label bit outside dimension range.
  CHECK_THROWS_AS(Omnitree(1, {Label(2), 0, 0}), std::invalid_argument);
  CHECK_NOTHROW(Omnitree(2, {label_from_string("10"), 0, 0}));
}

TEST_CASE("child ordinal bit convention", "[core]") {
  using P = std::pair<int, int>;
  // Lowest split dimension is the most significant ordinal bit.
  const std::array<P, 2> a1 = {P{0, 1}, P{1, 0}};
  CHECK(child_ordinal(label_from_string("110"), 3, a1) == 2);
  const std::array<P, 2> a2 = {P{1, 1}, P{2, 1}};
  CHECK(child_ordinal(label_from_string("011"), 3, a2) == 3);
  const std::array<P, 1> a3 = {P{0, 0}};
  CHECK(child_ordinal(label_from_string("100"), 3, a3) == 0);
  // Assigning to a non-split dimension is rejected.
  const std::array<P, 1> bad = {P{1, 0}};
  CHECK_THROWS_AS(child_ordinal(label_from_string("100"), 3, bad), std::invalid_argument);
}

TEST_CASE("leaf rectangles of the sample tree", "[core]") {
  const auto rects = leaf_rectangles(sample_tree_2d());
  REQUIRE(rects.size() == 4);
  auto box = [](const Rectangle& r) {
    return std::array<double, 4>{r.lower(0), r.upper(0), r.lower(1), r.upper(1)};
  };
  CHECK(box(rects[0]) == std::array<double, 4>{0.0, 0.5, 0.0, 0.5});
  CHECK(box(rects[1]) == std::array<double, 4>{0.0, 0.5, 0.5, 1.0});
  CHECK(box(rects[2]) == std::array<double, 4>{0.5, 0.75, 0.0, 1.0});
  CHECK(box(rects[3]) == std::array<double, 4>{0.75, 1.0, 0.0, 1.0});
}

TEST_CASE("singleton leaf rectangle is the unit square", "[core]") {
  const auto rects = leaf_rectangles(singleton_tree(2));
  REQUIRE(rects.size() == 1);
  CHECK(rects[0] == Rectangle::root(2));
}

TEST_CASE("leaf volumes tile the domain", "[core]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto tree = random_tree(seed, 3, 63);
    REQUIRE(tree.leaf_count() == 64);
    double sum = 0.0;
    for (const auto& r : leaf_rectangles(tree)) sum += r.volume();
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("each point lies in exactly one leaf", "[core]") {
  const auto tree = random_tree(7, 3, 40);
  const auto rects = leaf_rectangles(tree);
  RandomStream rs(7, SubstreamKey(StreamPurpose::kMisc).add_u32(11));
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> x = {rs.next_double(), rs.next_double(), rs.next_double()};
    std::size_t hits = 0;
    for (const auto& r : rects) hits += r.contains_point(x) ? 1 : 0;
    REQUIRE(hits == 1);
  }
}

TEST_CASE("locate agrees with leaf enumeration", "[core]") {
  const auto tree = sample_tree_2d();
  CHECK(locate(singleton_tree(3), std::vector<double>{0.3, 0.9, 0.1}) == 0);
  CHECK(locate(tree, std::vector<double>{0.6, 0.2}) == 2);
  CHECK(locate(tree, std::vector<double>{1.0, 1.0}) == 3);
  CHECK_THROWS_AS(locate(tree, std::vector<double>{1.5, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(locate(tree, std::vector<double>{0.5, -0.1}), std::invalid_argument);
}

TEST_CASE("locate round trip through leaf interiors", "[core]") {
  for (std::uint64_t seed = 10; seed < 14; ++seed) {
    const int d = 2 + int(seed % 3);
    const auto tree = random_tree(seed, d, 30);
    const auto rects = leaf_rectangles(tree);
    TreeIndex index(tree);
    for (std::size_t n = 0; n < rects.size(); ++n) {
      std::vector<double> mid(std::size_t(d), 0.0);
      for (int j = 0; j < d; ++j) mid[std::size_t(j)] = 0.5 * (rects[n].lower(j) + rects[n].upper(j));
      REQUIRE(index.locate(mid) == n);
    }
  }
}

TEST_CASE("node statistics", "[core]") {
  const auto s = node_stats(singleton_tree(3));
  CHECK(s.node_count == 1);
  CHECK(s.leaf_count == 1);
  CHECK(s.mean_leaf_depth == 0.0);
  CHECK(s.max_level == std::vector<int>{0, 0, 0});

  const auto full = node_stats(Omnitree(3, {label_from_string("111"), 0, 0, 0, 0, 0, 0, 0, 0}));
  CHECK(full.node_count == 9);
  CHECK(full.leaf_count == 8);
  CHECK(full.mean_leaf_depth == 1.0);

  const auto sample = node_stats(sample_tree_2d());
  CHECK(sample.node_count == 7);
  CHECK(sample.leaf_count == 4);
  CHECK(sample.max_level == std::vector<int>{2, 1});
  CHECK(sample.split_count == std::vector<std::size_t>{2, 1});
}

TEST_CASE("normalization predicate", "[core]") {
  CHECK(is_normalized(singleton_tree(4)));
  CHECK(is_normalized(sample_tree_2d()));
  // Both children split dimension 1 while the parent does not.
  const Omnitree bad(2, {label_from_string("10"), label_from_string("01"), 0, 0,
                         label_from_string("01"), 0, 0});
  CHECK_FALSE(is_normalized(bad));
}

TEST_CASE("truncating a tree breaks self-delimitation", "[core]") {
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    const auto tree = random_tree(seed, 2 + int(seed % 3), 20);
    auto labels = tree.labels();
    labels.pop_back();
    CHECK_THROWS_AS(Omnitree(tree.dimension(), labels), std::invalid_argument);
  }
}

TEST_CASE("octree-mode trees carry only isotropic labels", "[core]") {
  for (std::uint64_t seed = 30; seed < 33; ++seed) {
    const auto tree = random_tree(seed, 3, 12, /*octree_mode=*/true);
    CHECK(is_octree(tree));
    for (const Label l : tree.labels())
      CHECK((l == 0 || l == label_from_string("111")));
  }
  CHECK_FALSE(is_octree(sample_tree_2d()));
}

TEST_CASE("node rectangle by preorder position", "[core]") {
  const auto tree = sample_tree_2d();
  CHECK(node_rectangle(tree, 0) == Rectangle::root(2));
  const auto r4 = node_rectangle(tree, 4);
  CHECK(r4.level == std::vector<std::uint8_t>{1, 0});
  CHECK(r4.index == std::vector<std::uint64_t>{1, 0});
  const auto r6 = node_rectangle(tree, 6);
  CHECK(r6.level == std::vector<std::uint8_t>{2, 0});
  CHECK(r6.index == std::vector<std::uint64_t>{3, 0});
}

TEST_CASE("code order and hash", "[core]") {
  const auto rects = leaf_rectangles(sample_tree_2d());
  CHECK(code_less(rects[0], rects[1]));
  CHECK(code_less(rects[1], rects[2]));
  CHECK_FALSE(code_less(rects[2], rects[2]));
  CHECK(code_hash(rects[0]) != code_hash(rects[1]));
  CHECK(code_string(rects[2], 0) == "10");
  CHECK(code_string(rects[2], 1) == "");
}
