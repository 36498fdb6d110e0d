#ifndef OMNITREE_TESTS_SUPPORT_HPP
#define OMNITREE_TESTS_SUPPORT_HPP

// Shared test helpers: deterministic random trees, an independent octree
// splitter used as a reference partition, and small geometry builders.

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "omnitree/core.hpp"
#include "omnitree/refinement.hpp"
#include "omnitree/rng.hpp"

namespace omnitree::testing {

/// Tree with 7 nodes / 4 leaves in 2-d: the root splits dimension 0, the
/// left child splits dimension 1, the right child splits dimension 0 again.
/// Leaf boxes in Z order: (0,.5)x(0,.5), (0,.5)x(.5,1), (.5,.75)x(0,1),
/// (.75,1)x(0,1).
inline Omnitree sample_tree_2d() {
  return Omnitree(2, {label_from_string("10"), label_from_string("01"), 0, 0,
                      label_from_string("10"), 0, 0});
}

inline std::vector<int> unit_marker(int d, int dim) {
  std::vector<int> m(std::size_t(d), 0);
  m[std::size_t(dim)] = 1;
  return m;
}

inline std::vector<int> ones_marker(int d) { return std::vector<int>(std::size_t(d), 1); }

/// Applies `steps` random refinements, one leaf at a time. Unit markers in a
/// random dimension by default; all-ones markers when `octree_mode`.
inline Omnitree random_tree(std::uint64_t seed, int d, int steps, bool octree_mode = false) {
  Omnitree tree = singleton_tree(d);
  RandomStream rs(seed, SubstreamKey(StreamPurpose::kMisc).add_u32(std::uint32_t(d)));
  for (int s = 0; s < steps; ++s) {
    TreeIndex index(tree);
    const auto leaf =
        std::min(std::size_t(rs.next_double() * double(tree.leaf_count())),
                 tree.leaf_count() - 1);
    RefinementPlan plan(tree);
    if (octree_mode) {
      plan.mark(index.leaf_node(leaf), ones_marker(d));
    } else {
      const int dim = std::min(int(rs.next_double() * d), d - 1);
      plan.mark(index.leaf_node(leaf), unit_marker(d, dim));
    }
    tree = refine(tree, plan);
  }
  return tree;
}

/// Reference octree: a flat list of cubes split directly, with no tree
/// machinery shared with the library implementation.
struct FlatOctree {
  int d;
  // Each cube: scalar level plus per-dimension index.
  std::vector<std::pair<int, std::vector<std::uint64_t>>> cubes;

  explicit FlatOctree(int dimension) : d(dimension) {
    cubes.push_back({0, std::vector<std::uint64_t>(std::size_t(dimension), 0)});
  }

  /// Splits the cube containing x into 2^d children.
  void split_at(const std::vector<double>& x) {
    const std::size_t k = find(x);
    auto [level, idx] = cubes[k];
    cubes.erase(cubes.begin() + std::ptrdiff_t(k));
    for (unsigned c = 0; c < (1u << d); ++c) {
      std::vector<std::uint64_t> child(idx);
      for (int j = 0; j < d; ++j) {
        const unsigned bit = (c >> (d - 1 - j)) & 1u;
        child[std::size_t(j)] = (child[std::size_t(j)] << 1) | bit;
      }
      cubes.push_back({level + 1, std::move(child)});
    }
  }

  std::size_t find(const std::vector<double>& x) const {
    for (std::size_t k = 0; k < cubes.size(); ++k) {
      const auto& [level, idx] = cubes[k];
      bool inside = true;
      for (int j = 0; j < d && inside; ++j) {
        const double lo = std::ldexp(double(idx[std::size_t(j)]), -level);
        const double hi = std::ldexp(double(idx[std::size_t(j)]) + 1.0, -level);
        inside = x[std::size_t(j)] >= lo && (x[std::size_t(j)] < hi || hi == 1.0);
      }
      if (inside) return k;
    }
    throw std::logic_error("flat octree: point not covered");
  }

  /// Canonical multiset of (level vector, index vector) pairs.
  std::multiset<std::pair<std::vector<int>, std::vector<std::uint64_t>>> partition() const {
    std::multiset<std::pair<std::vector<int>, std::vector<std::uint64_t>>> out;
    for (const auto& [level, idx] : cubes)
      out.insert({std::vector<int>(std::size_t(d), level), idx});
    return out;
  }
};

inline std::multiset<std::pair<std::vector<int>, std::vector<std::uint64_t>>> tree_partition(
    const Omnitree& tree) {
  std::multiset<std::pair<std::vector<int>, std::vector<std::uint64_t>>> out;
  for (const auto& rect : leaf_rectangles(tree)) {
    std::vector<int> level(rect.level.begin(), rect.level.end());
    out.insert({std::move(level), rect.index});
  }
  return out;
}

}  // namespace omnitree::testing

#endif  // OMNITREE_TESTS_SUPPORT_HPP
