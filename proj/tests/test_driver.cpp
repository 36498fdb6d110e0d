#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "omnitree/driver.hpp"
#include "omnitree/metrics.hpp"
#include "support.hpp"

using namespace omnitree;

namespace {

/// Membership that is false everywhere (an absent object).
struct NeverShape final : ShapeOracle {
  int dimension() const override { return 3; }
  bool contains(std::span<const double>) const override { return false; }
};

Rectangle random_rect(RandomStream& rs, int d, int max_level) {
  Rectangle r = Rectangle::root(d);
  for (int j = 0; j < d; ++j) {
    const int level = int(rs.next_double() * (max_level + 1));
    r.level[std::size_t(j)] = std::uint8_t(level);
    r.index[std::size_t(j)] = std::uint64_t(rs.next_double() * double(1u << level));
  }
  return r;
}

}  // namespace

TEST_CASE("saltelli batch layout", "[driver]") {
  const auto root = Rectangle::root(3);
  auto batch = saltelli_points(root, 512, 7);
  CHECK(batch.point_count() == 4096);  // n_s * (2d + 2) at d = 3

  const auto root4 = Rectangle::root(4);
  CHECK(saltelli_points(root4, 512, 7).point_count() == 5120);

  CHECK_THROWS_AS(saltelli_points(root, 500, 7), std::invalid_argument);

  // Cross matrices substitute exactly one column.
  std::vector<double> p(3, 0.0), a_row(3, 0.0), b_row(3, 0.0);
  for (std::size_t k = 0; k < 8; ++k) {
    batch.point(k, a_row);
    batch.point(batch.n + k, b_row);
    for (int i = 0; i < 3; ++i) {
      batch.point((2 + std::size_t(i)) * batch.n + k, p);
      for (int j = 0; j < 3; ++j)
        REQUIRE(p[std::size_t(j)] == (j == i ? b_row[std::size_t(j)] : a_row[std::size_t(j)]));
      batch.point((5 + std::size_t(i)) * batch.n + k, p);
      for (int j = 0; j < 3; ++j)
        REQUIRE(p[std::size_t(j)] == (j == i ? a_row[std::size_t(j)] : b_row[std::size_t(j)]));
    }
  }
  CHECK(batch.a != batch.b);

  // Deterministic in (rect, n_s, seed).
  const auto again = saltelli_points(root, 512, 7);
  CHECK(again.a == batch.a);
  CHECK(again.b == batch.b);
}

TEST_CASE("saltelli points stay inside their rectangle", "[driver]") {
  RandomStream rs(3, SubstreamKey(StreamPurpose::kMisc).add_u32(70));
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + trial % 3;
    const auto rect = random_rect(rs, d, 6);
    const auto batch = saltelli_points(rect, 64, 11);
    std::vector<double> p(std::size_t(d), 0.0);
    for (std::size_t i = 0; i < batch.point_count(); ++i) {
      batch.point(i, p);
      for (int j = 0; j < d; ++j) {
        REQUIRE(p[std::size_t(j)] >= rect.lower(j));
        REQUIRE(p[std::size_t(j)] < rect.upper(j));
      }
    }
  }
}

TEST_CASE("variance score of binary batches", "[driver]") {
  auto batch = saltelli_points(Rectangle::root(3), 512, 1);
  const std::size_t n2 = 2 * batch.n;

  batch.fa.assign(batch.n, 0);
  batch.fb.assign(batch.n, 0);
  CHECK(variance_score(batch) == 0.0);

  batch.fa.assign(batch.n, 1);
  batch.fb.assign(batch.n, 1);
  CHECK(variance_score(batch) == 0.0);

  batch.fa.assign(batch.n, 0);
  batch.fb.assign(batch.n, 1);
  CHECK(std::abs(variance_score(batch) - 0.25) <= 1.0 / double(n2 - 1));
}

TEST_CASE("sensitivity estimator on a constant function", "[driver]") {
  auto batch = saltelli_points(Rectangle::root(3), 256, 2);
  evaluate_batch(batch, *std::make_shared<CubeShape>());
  CHECK(sensitivity_scores(batch) == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(variance_score(batch) == 0.0);
}

TEST_CASE("sensitivity estimator on an axis-aligned halfspace", "[driver]") {
  // Var[E[Y | x_0]] for the indicator of x_0 < 1/2 is exactly 1/4; the
  // estimator's per-term variance is 3/16, giving a known standard error.
  const HalfspaceShape half(0, 0.5);
  const double se = std::sqrt(3.0 / 16.0 / 512.0);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto batch = saltelli_points(Rectangle::root(3), 512, seed);
    evaluate_batch(batch, half);
    const auto s = sensitivity_scores(batch);
    CHECK(std::abs(s[0] - 0.25) <= 3.0 * se);
    // The function ignores the other inputs, so the cross matrices repeat
    // the base evaluations and those estimates vanish identically.
    CHECK(s[1] == 0.0);
    CHECK(s[2] == 0.0);
  }
}

TEST_CASE("sensitivity estimator matches a quadrature reference", "[driver]") {
  // For Y = 1{x_0 < a}, Var[E[Y|x_0]] computed by midpoint quadrature over
  // x_0 equals a(1-a); the Monte Carlo estimate must agree within noise.
  const double a = 0.3;
  double reference = 0.0;
  const int cells = 200000;
  for (int c = 0; c < cells; ++c) {
    const double x0 = (c + 0.5) / cells;
    const double cond = x0 < a ? 1.0 : 0.0;
    reference += (cond - a) * (cond - a);
  }
  reference /= cells;
  CHECK(std::abs(reference - a * (1 - a)) < 1e-4);

  const HalfspaceShape half(0, a);
  auto batch = saltelli_points(Rectangle::root(3), 512, 5);
  evaluate_batch(batch, half);
  // Empirical standard error of the estimator terms.
  double mean = 0.0;
  std::vector<double> terms(batch.n);
  for (std::size_t k = 0; k < batch.n; ++k) {
    terms[k] = double(batch.fb[k]) * (double(batch.fab[k]) - double(batch.fa[k]));
    mean += terms[k];
  }
  mean /= double(batch.n);
  double var = 0.0;
  for (const double t : terms) var += (t - mean) * (t - mean);
  const double se = std::sqrt(var / double(batch.n - 1) / double(batch.n));
  const auto s = sensitivity_scores(batch);
  CHECK(std::abs(s[0] - reference) <= 3.0 * se + 1e-12);
}

TEST_CASE("leaf priorities", "[driver]") {
  const Rectangle root = Rectangle::root(3);

  auto constant = saltelli_points(root, 128, 3);
  evaluate_batch(constant, CubeShape());
  for (const auto& p : leaf_priorities(root, constant, Mode::kOctree)) CHECK(p.score == 0.0);
  for (const auto& p : leaf_priorities(root, constant, Mode::kOmnitree)) CHECK(p.score == 0.0);

  auto half = saltelli_points(root, 512, 3);
  evaluate_batch(half, HalfspaceShape(0, 0.5));
  const auto omni = leaf_priorities(root, half, Mode::kOmnitree);
  REQUIRE(omni.size() == 3);
  CHECK(omni[0].dim == 0);
  CHECK(std::abs(omni[0].score - 0.25) < 0.06);
  CHECK(omni[1].score == 0.0);
  CHECK(omni[2].score == 0.0);
  const auto oct = leaf_priorities(root, half, Mode::kOctree);
  REQUIRE(oct.size() == 1);
  CHECK(oct[0].dim == -1);
  CHECK(std::abs(oct[0].score - 0.25) < 0.06);
}

TEST_CASE("first-order scores never exceed the variance by more than noise", "[driver]") {
  RandomStream rs(9, SubstreamKey(StreamPurpose::kMisc).add_u32(71));
  const SphereShape sphere;
  for (int trial = 0; trial < 100; ++trial) {
    const auto rect = random_rect(rs, 3, 3);
    auto batch = saltelli_points(rect, 256, 17);
    evaluate_batch(batch, sphere);
    const double variance = variance_score(batch);
    const auto s = sensitivity_scores(batch);
    double sum = 0.0, se_sq = 0.0;
    for (int i = 0; i < 3; ++i) {
      sum += s[std::size_t(i)];
      double mean = 0.0;
      std::vector<double> terms(batch.n);
      for (std::size_t k = 0; k < batch.n; ++k) {
        terms[k] = double(batch.fb[k]) *
                   (double(batch.fab[std::size_t(i) * batch.n + k]) - double(batch.fa[k]));
        mean += terms[k];
      }
      mean /= double(batch.n);
      double var = 0.0;
      for (const double t : terms) var += (t - mean) * (t - mean);
      se_sq += var / double(batch.n - 1) / double(batch.n);
    }
    REQUIRE(sum <= variance + 3.0 * std::sqrt(se_sq) + 1.0 / std::sqrt(2.0 * batch.n) + 1e-12);
  }
}

TEST_CASE("priority queue ordering", "[driver]") {
  // Highest score first; ties by location code, then by dimension.
  const auto rects = leaf_rectangles(omnitree::testing::sample_tree_2d());
  std::priority_queue<Priority, std::vector<Priority>, PriorityWorse> queue;
  queue.push({0.5, rects[2], 1});
  queue.push({0.5, rects[2], 0});
  queue.push({0.5, rects[1], 1});
  queue.push({0.9, rects[3], 0});
  queue.push({0.1, rects[0], 0});

  std::vector<std::pair<double, int>> order;
  std::vector<Rectangle> leaves;
  while (!queue.empty()) {
    order.push_back({queue.top().score, queue.top().dim});
    leaves.push_back(queue.top().leaf);
    queue.pop();
  }
  CHECK(order == std::vector<std::pair<double, int>>{
                     {0.9, 0}, {0.5, 1}, {0.5, 0}, {0.5, 1}, {0.1, 0}});
  CHECK(leaves[1] == rects[1]);  // smaller code pops before rects[2]
  CHECK(leaves[2] == rects[2]);  // then dimension 0 before dimension 1
  CHECK(leaves[3] == rects[2]);
}

TEST_CASE("adaptation resolves the cube immediately", "[driver]") {
  const CubeShape cube;
  for (const Mode mode : {Mode::kOctree, Mode::kOmnitree}) {
    AdaptConfig config;
    config.mode = mode;
    config.target_leaves = 16;
    const auto result = adapt(cube, config);
    CHECK(result.perfectly_resolved);
    CHECK(result.tree.leaf_count() == 1);
  }
}

TEST_CASE("adaptation of a halfspace concentrates on its axis", "[driver]") {
  const HalfspaceShape half(0, 1.0 / 3.0);
  AdaptConfig config;
  config.mode = Mode::kOmnitree;
  config.target_leaves = 16;
  const auto result = adapt(half, config);
  CHECK_FALSE(result.perfectly_resolved);
  CHECK(result.tree.leaf_count() == 16);
  const auto stats = node_stats(result.tree);
  CHECK(stats.split_count == std::vector<std::size_t>{15, 0, 0});
  CHECK(stats.max_level == std::vector<int>{15, 0, 0});
  CHECK(is_normalized(result.tree));
}

TEST_CASE("octree mode keeps isotropic labels and the leaf budget", "[driver]") {
  const SphereShape sphere;
  AdaptConfig config;
  config.mode = Mode::kOctree;
  config.target_leaves = 100;
  const auto result = adapt(sphere, config);
  CHECK(is_octree(result.tree));
  CHECK(result.tree.leaf_count() >= 100);
  CHECK(result.tree.leaf_count() < 100 + 8);

  config.mode = Mode::kOmnitree;
  const auto omni = adapt(sphere, config);
  CHECK(omni.tree.leaf_count() == 100);
}

TEST_CASE("adaptation is deterministic and thread-invariant", "[driver]") {
  const SphereShape sphere;
  AdaptConfig config;
  config.mode = Mode::kOmnitree;
  config.target_leaves = 48;
  config.seed = 21;
  const auto a = adapt(sphere, config);
  const auto b = adapt(sphere, config);
  CHECK(a.tree == b.tree);
  config.threads = 4;
  const auto c = adapt(sphere, config);
  CHECK(a.tree == c.tree);
}

TEST_CASE("larger budgets refine the smaller-budget partition", "[driver]") {
  const SphereShape sphere;
  AdaptConfig config;
  config.mode = Mode::kOmnitree;
  config.seed = 4;
  config.target_leaves = 32;
  const auto small = adapt(sphere, config);
  config.target_leaves = 96;
  const auto large = adapt(sphere, config);
  const auto coarse = leaf_rectangles(small.tree);
  for (const auto& fine : leaf_rectangles(large.tree)) {
    int covered_by = 0;
    for (const auto& c : coarse) covered_by += c.covers(fine) ? 1 : 0;
    REQUIRE(covered_by == 1);
  }

  // Ladder snapshots match the separate runs.
  const std::size_t thresholds[2] = {32, 96};
  const auto snapshots = adapt_ladder(sphere, config, thresholds);
  REQUIRE(snapshots.size() == 2);
  CHECK(snapshots[0].tree == small.tree);
  CHECK(snapshots[1].tree == large.tree);
}

TEST_CASE("data fill", "[driver]") {
  const CubeShape cube;
  const NeverShape never;
  const auto tree = omnitree::testing::random_tree(31, 3, 20);

  const auto full = fill_data(tree, cube, 64, 5);
  CHECK(full == BinaryField(tree.leaf_count(), 1));
  const auto empty = fill_data(tree, never, 64, 5);
  CHECK(empty == BinaryField(tree.leaf_count(), 0));

  // Pure leaves of the adapted halfspace tree take the side of their center.
  const HalfspaceShape half(0, 1.0 / 3.0);
  AdaptConfig config;
  config.mode = Mode::kOmnitree;
  config.target_leaves = 16;
  const auto result = adapt(half, config);
  const auto field = fill_data(result.tree, half, 256, 9);
  const auto rects = leaf_rectangles(result.tree);
  for (std::size_t n = 0; n < rects.size(); ++n) {
    const bool pure = rects[n].upper(0) <= 1.0 / 3.0 || rects[n].lower(0) >= 1.0 / 3.0;
    if (!pure) continue;
    const double center = 0.5 * (rects[n].lower(0) + rects[n].upper(0));
    REQUIRE(int(field[n]) == (center < 1.0 / 3.0 ? 1 : 0));
  }

  // Deterministic and thread-invariant.
  CHECK(fill_data(tree, cube, 64, 5, 4) == full);
}
