#ifndef OMNITREE_DRIVER_HPP
#define OMNITREE_DRIVER_HPP

// Adaptive refinement driver.
//
// Leaves are scored from Monte Carlo samples laid out for Saltelli's method:
// base matrices A and B plus, per dimension, A with one column from B and B
// with one column from A, n_s*(2d+2) points in total. Octree mode scores a
// leaf by the sample variance times the leaf volume; omnitree mode scores
// each dimension by the variance-scaled first-order sensitivity index times
// the volume. A priority queue realizes the best refinement one leaf at a
// time until the leaf budget is reached.
//
// All sampling is keyed by (seed, purpose, leaf location code), so results
// are identical across refinement orders and thread counts.

#include <cstdint>
#include <memory>
#include <queue>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "omnitree/codec.hpp"
#include "omnitree/core.hpp"
#include "omnitree/oracles.hpp"
#include "omnitree/parallel.hpp"
#include "omnitree/refinement.hpp"
#include "omnitree/rng.hpp"

namespace omnitree {

enum class Mode { kOctree, kOmnitree };

inline const char* mode_name(Mode mode) {
  return mode == Mode::kOctree ? "octree" : "omnitree";
}

inline Mode parse_mode(const std::string& name) {
  if (name == "octree") return Mode::kOctree;
  if (name == "omnitree") return Mode::kOmnitree;
  throw std::invalid_argument("mode must be octree or omnitree");
}

struct AdaptConfig {
  Mode mode = Mode::kOmnitree;
  std::size_t target_leaves = 16;
  unsigned saltelli_base = 512;  // power of two
  unsigned fill_samples = 4096;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Saltelli evaluation layout for one rectangle. Rows of A and B are stored
/// explicitly; the cross-matrix points are derived on access.
struct SampleBatch {
  Rectangle rect;
  int d = 0;
  unsigned n = 0;
  std::vector<double> a, b;                 // n x d, row major
  std::vector<std::uint8_t> fa, fb;         // n evaluations each
  std::vector<std::uint8_t> fab, fba;       // d x n evaluations each

  std::size_t point_count() const { return std::size_t(n) * (2 * std::size_t(d) + 2); }

  /// Point `idx` in the canonical order A, B, AB_0..AB_{d-1}, BA_0..BA_{d-1}.
  void point(std::size_t idx, std::span<double> out) const {
    const std::size_t block = idx / n, k = idx % n;
    const auto row_a = std::span<const double>(a).subspan(k * std::size_t(d), std::size_t(d));
    const auto row_b = std::span<const double>(b).subspan(k * std::size_t(d), std::size_t(d));
    if (block == 0) {
      std::copy(row_a.begin(), row_a.end(), out.begin());
    } else if (block == 1) {
      std::copy(row_b.begin(), row_b.end(), out.begin());
    } else if (block < 2 + std::size_t(d)) {
      const std::size_t i = block - 2;
      std::copy(row_a.begin(), row_a.end(), out.begin());
      out[i] = row_b[i];
    } else {
      const std::size_t i = block - 2 - std::size_t(d);
      std::copy(row_b.begin(), row_b.end(), out.begin());
      out[i] = row_a[i];
    }
  }
};

/// Draws the base matrices for `rect`. n_s must be a power of two.
inline SampleBatch saltelli_points(const Rectangle& rect, unsigned n_s, std::uint64_t seed) {
  if (n_s == 0 || (n_s & (n_s - 1)) != 0)
    throw std::invalid_argument("saltelli base count must be a power of two");
  SampleBatch batch;
  batch.rect = rect;
  batch.d = rect.dimension();
  batch.n = n_s;
  const std::uint64_t leaf = code_hash(rect);
  RandomStream sa(seed, SubstreamKey(StreamPurpose::kSampleA).add_u64(leaf));
  RandomStream sb(seed, SubstreamKey(StreamPurpose::kSampleB).add_u64(leaf));
  const std::size_t total = std::size_t(n_s) * std::size_t(batch.d);
  batch.a.resize(total);
  batch.b.resize(total);
  for (std::size_t k = 0; k < n_s; ++k) {
    for (int j = 0; j < batch.d; ++j) {
      const double lo = rect.lower(j), hi = rect.upper(j);
      batch.a[k * std::size_t(batch.d) + std::size_t(j)] = lo + sa.next_double() * (hi - lo);
      batch.b[k * std::size_t(batch.d) + std::size_t(j)] = lo + sb.next_double() * (hi - lo);
    }
  }
  return batch;
}

/// Evaluates the oracle on all n_s*(2d+2) points of the batch.
inline void evaluate_batch(SampleBatch& batch, const ShapeOracle& oracle) {
  const int d = batch.d;
  batch.fa.resize(batch.n);
  batch.fb.resize(batch.n);
  batch.fab.assign(std::size_t(d) * batch.n, 0);
  batch.fba.assign(std::size_t(d) * batch.n, 0);
  std::vector<double> point(std::size_t(d), 0.0);
  for (std::size_t k = 0; k < batch.n; ++k) {
    const auto row_a = std::span<const double>(batch.a).subspan(k * std::size_t(d), std::size_t(d));
    const auto row_b = std::span<const double>(batch.b).subspan(k * std::size_t(d), std::size_t(d));
    std::copy(row_a.begin(), row_a.end(), point.begin());
    batch.fa[k] = oracle.contains(point) ? 1 : 0;
    std::copy(row_b.begin(), row_b.end(), point.begin());
    batch.fb[k] = oracle.contains(point) ? 1 : 0;
    for (int i = 0; i < d; ++i) {
      std::copy(row_a.begin(), row_a.end(), point.begin());
      point[std::size_t(i)] = row_b[std::size_t(i)];
      batch.fab[std::size_t(i) * batch.n + k] = oracle.contains(point) ? 1 : 0;
      std::copy(row_b.begin(), row_b.end(), point.begin());
      point[std::size_t(i)] = row_a[std::size_t(i)];
      batch.fba[std::size_t(i) * batch.n + k] = oracle.contains(point) ? 1 : 0;
    }
  }
}

/// Unbiased sample variance of the oracle over the A and B evaluations.
inline double variance_score(const SampleBatch& batch) {
  const std::size_t n2 = 2 * std::size_t(batch.n);
  std::size_t ones = 0;
  for (const auto v : batch.fa) ones += v;
  for (const auto v : batch.fb) ones += v;
  const double mean = double(ones) / double(n2);
  // For 0/1 data the sum of squares equals the sum.
  return (double(ones) - double(n2) * mean * mean) / double(n2 - 1);
}

/// Variance-scaled first-order sensitivity estimates
/// S_i * V ~= (1/n) sum_k f(B)_k (f(AB_i)_k - f(A)_k), clamped at zero.
inline std::vector<double> sensitivity_scores(const SampleBatch& batch) {
  std::vector<double> s(std::size_t(batch.d), 0.0);
  for (int i = 0; i < batch.d; ++i) {
    long long acc = 0;
    const auto* fab = batch.fab.data() + std::size_t(i) * batch.n;
    for (std::size_t k = 0; k < batch.n; ++k)
      acc += (long long)(batch.fb[k]) * ((long long)(fab[k]) - (long long)(batch.fa[k]));
    s[std::size_t(i)] = std::max(0.0, double(acc) / double(batch.n));
  }
  return s;
}

struct Priority {
  double score = 0.0;
  Rectangle leaf;
  int dim = -1;  // refinement dimension; -1 means all dimensions (octree)
};

/// Queue ordering: highest score first, then lexicographically smallest
/// location code, then lowest dimension.
struct PriorityWorse {
  bool operator()(const Priority& a, const Priority& b) const {
    if (a.score != b.score) return a.score < b.score;
    if (!(a.leaf == b.leaf)) return code_less(b.leaf, a.leaf);
    return a.dim > b.dim;
  }
};

/// Scores one leaf: a single variance entry in octree mode, one entry per
/// dimension in omnitree mode. A constant leaf yields all-zero scores.
inline std::vector<Priority> leaf_priorities(const Rectangle& rect, const SampleBatch& batch,
                                             Mode mode) {
  const double volume = rect.volume();
  const double variance = variance_score(batch);
  std::vector<Priority> out;
  if (mode == Mode::kOctree) {
    out.push_back({variance * volume, rect, -1});
    return out;
  }
  const auto s = sensitivity_scores(batch);
  for (int j = 0; j < rect.dimension(); ++j) {
    const double score = variance == 0.0 ? 0.0 : s[std::size_t(j)] * volume;
    out.push_back({score, rect, j});
  }
  return out;
}

struct AdaptSnapshot {
  Omnitree tree;
  bool perfectly_resolved = false;  // stopped early with nothing left to refine
};

struct AdaptResult {
  Omnitree tree;
  bool perfectly_resolved = false;
};

namespace detail {

struct RectCodeHash {
  std::size_t operator()(const Rectangle& r) const { return std::size_t(code_hash(r)); }
};

inline std::vector<Priority> score_leaf(const Rectangle& rect, const ShapeOracle& oracle,
                                        const AdaptConfig& config) {
  SampleBatch batch = saltelli_points(rect, config.saltelli_base, config.seed);
  evaluate_batch(batch, oracle);
  return leaf_priorities(rect, batch, config.mode);
}

}  // namespace detail

/// Runs the adaptation loop, snapshotting the tree the first time the leaf
/// count reaches each threshold (ascending). If every remaining priority is
/// zero before a threshold is met, the current tree fills the remaining
/// snapshots and they are flagged perfectly_resolved.
inline std::vector<AdaptSnapshot> adapt_ladder(const ShapeOracle& oracle,
                                               const AdaptConfig& config,
                                               std::span<const std::size_t> thresholds) {
  if (thresholds.empty()) throw std::invalid_argument("empty threshold ladder");
  for (std::size_t i = 0; i + 1 < thresholds.size(); ++i)
    if (thresholds[i] >= thresholds[i + 1])
      throw std::invalid_argument("thresholds must be strictly increasing");
  const int d = oracle.dimension();

  Omnitree tree = singleton_tree(d);
  std::priority_queue<Priority, std::vector<Priority>, PriorityWorse> queue;
  std::unordered_set<Rectangle, detail::RectCodeHash> live;

  const Rectangle root = Rectangle::root(d);
  for (auto& p : detail::score_leaf(root, oracle, config)) queue.push(std::move(p));
  live.insert(root);

  std::vector<AdaptSnapshot> snapshots;
  std::size_t next = 0;
  auto emit_reached = [&] {
    while (next < thresholds.size() && tree.leaf_count() >= thresholds[next]) {
      snapshots.push_back({tree, false});
      ++next;
    }
  };
  emit_reached();

  while (next < thresholds.size()) {
    if (queue.empty()) break;
    Priority top = queue.top();
    queue.pop();
    if (live.find(top.leaf) == live.end()) continue;  // stale entry
    if (top.score <= 0.0) break;  // nothing informative left anywhere

    // Realize this refinement: one marker on one leaf.
    const Label split = top.dim < 0 ? ((Label(1) << d) - 1) : (Label(1) << top.dim);
    std::vector<int> marker(std::size_t(d), 0);
    for (int j = 0; j < d; ++j)
      if (label_bit(split, j)) marker[std::size_t(j)] = 1;
    TreeIndex index(tree);
    const auto [pos, rect] =
        detail::search_descendant_impl(tree, index, 0, Rectangle::root(d), top.leaf);
    if (!(rect == top.leaf) || tree.label(pos) != 0)
      throw std::logic_error("live set referenced a box that is not a leaf");
    RefinementPlan plan(tree);
    plan.mark(pos, marker);
    tree = refine(tree, plan);
    live.erase(top.leaf);

    const unsigned children = 1u << label_popcount(split);
    std::vector<Rectangle> child_rects;
    child_rects.reserve(children);
    for (unsigned c = 0; c < children; ++c) child_rects.push_back(top.leaf.child(split, c));
    std::vector<std::vector<Priority>> scored(children);
    parallel_for(children, config.threads, [&](std::size_t c) {
      scored[c] = detail::score_leaf(child_rects[c], oracle, config);
    });
    for (unsigned c = 0; c < children; ++c) {
      live.insert(child_rects[c]);
      for (auto& p : scored[c]) queue.push(std::move(p));
    }
    emit_reached();
  }

  // Early stop: everything resolvable is resolved.
  while (next < thresholds.size()) {
    snapshots.push_back({tree, true});
    ++next;
  }
  return snapshots;
}

inline AdaptResult adapt(const ShapeOracle& oracle, const AdaptConfig& config) {
  if (config.target_leaves < 1) throw std::invalid_argument("target leaf count must be >= 1");
  const std::size_t thresholds[1] = {config.target_leaves};
  auto snapshots = adapt_ladder(oracle, config, thresholds);
  return {std::move(snapshots[0].tree), snapshots[0].perfectly_resolved};
}

/// Fills the data vector: per leaf, the mean of n_g uniform samples decides
/// the stored bit (>= 0.5 rounds to 1).
inline BinaryField fill_data(const Omnitree& tree, const ShapeOracle& oracle, unsigned n_g,
                             std::uint64_t seed, int threads = 1) {
  if (n_g == 0) throw std::invalid_argument("fill sample count must be positive");
  const auto rects = leaf_rectangles(tree);
  const int d = tree.dimension();
  BinaryField field(rects.size(), 0);
  parallel_for(rects.size(), threads, [&](std::size_t leaf) {
    const Rectangle& rect = rects[leaf];
    RandomStream rs(seed, SubstreamKey(StreamPurpose::kFill).add_u64(code_hash(rect)));
    std::vector<double> x(std::size_t(d), 0.0);
    std::size_t ones = 0;
    for (unsigned k = 0; k < n_g; ++k) {
      for (int j = 0; j < d; ++j) {
        const double lo = rect.lower(j), hi = rect.upper(j);
        x[std::size_t(j)] = lo + rs.next_double() * (hi - lo);
      }
      ones += oracle.contains(x) ? 1 : 0;
    }
    field[leaf] = (2 * ones >= n_g) ? 1 : 0;
  });
  return field;
}

}  // namespace omnitree

#endif  // OMNITREE_DRIVER_HPP
