#ifndef OMNITREE_REFINEMENT_HPP
#define OMNITREE_REFINEMENT_HPP

// Marker-based omnitree refinement.
//
// Refinement runs in four steps:
//   1. attach per-dimension markers to nodes (RefinementPlan),
//   2. sweep markers bottom-up: a unit of refinement in dimension j moves
//      from the children of a node to the node itself when every child
//      either carries such a unit or already splits j; children that were
//      already split receive a -1 entry that cancels their own split,
//   3. sweep top-down: units parked at a node that cannot absorb them
//      (the node already splits that dimension, or more units arrived than
//      one label bit can hold) are pushed to all children,
//   4. rebuild the tree top-down. Each constructed rectangle is mapped back
//      into the source tree; the new label is the source label plus the
//      resolved marker, and source leaves expand their remaining marker as a
//      uniform anisotropic subdivision.
//
// Negative entries exist only between steps 2 and 4; user-facing markers are
// non-negative.

#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "omnitree/core.hpp"

namespace omnitree {

/// Resolved / in-flight markers keyed by preorder node position. Values are
/// d-vectors; entries may be -1 during the sweep phases.
using MarkerMap = std::map<std::size_t, std::vector<int>>;

/// Accumulates user refinement requests against one specific tree. Node ids
/// are preorder positions in that tree and become meaningless after refine().
class RefinementPlan {
 public:
  explicit RefinementPlan(const Omnitree& tree)
      : dimension_(tree.dimension()), node_count_(tree.node_count()) {}

  void mark(std::size_t node, std::span<const int> marker) {
    if (node >= node_count_) throw std::invalid_argument("invalid node id");
    if (int(marker.size()) != dimension_)
      throw std::invalid_argument("marker dimension mismatch");
    int total = 0;
    for (const int m : marker) {
      if (m < 0) throw std::invalid_argument("user markers must be non-negative");
      total += m;
    }
    if (total < 1) throw std::invalid_argument("marker must request at least one refinement");
    auto& slot = markers_[node];
    if (slot.empty()) slot.assign(std::size_t(dimension_), 0);
    for (int j = 0; j < dimension_; ++j) slot[std::size_t(j)] += marker[std::size_t(j)];
    requested_ += std::size_t(total);
  }

  int dimension() const { return dimension_; }
  std::size_t node_count() const { return node_count_; }
  std::size_t total_requested() const { return requested_; }
  const MarkerMap& markers() const { return markers_; }

 private:
  int dimension_;
  std::size_t node_count_;
  std::size_t requested_ = 0;
  MarkerMap markers_;
};

namespace detail {

inline std::vector<int>* find_marker(MarkerMap& m, std::size_t pos) {
  const auto it = m.find(pos);
  return it == m.end() ? nullptr : &it->second;
}

inline int marker_entry(const MarkerMap& m, std::size_t pos, int j) {
  const auto it = m.find(pos);
  return it == m.end() ? 0 : it->second[std::size_t(j)];
}

inline void add_marker_entry(MarkerMap& m, int dimension, std::size_t pos, int j, int delta) {
  auto& slot = m[pos];
  if (slot.empty()) slot.assign(std::size_t(dimension), 0);
  slot[std::size_t(j)] += delta;
}

}  // namespace detail

/// Bottom-up sweep (step 2). Children are visited before their parents;
/// lifting repeats per node until no further unit can move.
inline MarkerMap sweep_up(const Omnitree& tree, MarkerMap markers) {
  TreeIndex index(tree);
  const int d = tree.dimension();
  for (std::size_t pos = tree.node_count(); pos-- > 0;) {
    const Label l = tree.label(pos);
    if (l == 0) continue;
    const unsigned children = 1u << label_popcount(l);
    std::vector<std::size_t> child_pos(children);
    {
      std::size_t p = pos + 1;
      for (unsigned c = 0; c < children; ++c) {
        child_pos[c] = p;
        p = index.subtree_end(p);
      }
    }
    for (int j = 0; j < d; ++j) {
      for (;;) {
        bool any_unit = false;
        bool all_contribute = true;
        for (unsigned c = 0; c < children && all_contribute; ++c) {
          const int m = detail::marker_entry(markers, child_pos[c], j);
          if (m >= 1)
            any_unit = true;
          else if (!(m == 0 && label_bit(tree.label(child_pos[c]), j)))
            all_contribute = false;
        }
        if (!any_unit || !all_contribute) break;
        for (unsigned c = 0; c < children; ++c)
          detail::add_marker_entry(markers, d, child_pos[c], j, -1);
        detail::add_marker_entry(markers, d, pos, j, +1);
      }
    }
  }
  // Drop all-zero entries so the map stays sparse.
  for (auto it = markers.begin(); it != markers.end();) {
    bool zero = true;
    for (const int v : it->second) zero &= (v == 0);
    it = zero ? markers.erase(it) : std::next(it);
  }
  return markers;
}

/// Top-down sweep (step 3). A nonleaf node can absorb at most 1 - b_j units
/// in dimension j; the excess moves to all children. Leaves absorb any
/// non-negative marker by expansion.
inline MarkerMap sweep_down(const Omnitree& tree, MarkerMap markers) {
  TreeIndex index(tree);
  const int d = tree.dimension();
  for (std::size_t pos = 0; pos < tree.node_count(); ++pos) {
    const Label l = tree.label(pos);
    if (l == 0) continue;
    auto* marker = detail::find_marker(markers, pos);
    if (marker == nullptr) continue;
    for (int j = 0; j < d; ++j) {
      const int capacity = label_bit(l, j) ? 0 : 1;
      const int excess = (*marker)[std::size_t(j)] - capacity;
      if ((*marker)[std::size_t(j)] < 1 || excess <= 0) continue;
      (*marker)[std::size_t(j)] = capacity;
      const unsigned children = 1u << label_popcount(l);
      std::size_t p = pos + 1;
      for (unsigned c = 0; c < children; ++c) {
        detail::add_marker_entry(markers, d, p, j, excess);
        p = index.subtree_end(p);
      }
    }
  }
  for (auto it = markers.begin(); it != markers.end();) {
    bool zero = true;
    for (const int v : it->second) zero &= (v == 0);
    it = zero ? markers.erase(it) : std::next(it);
  }
  return markers;
}

namespace detail {

/// Descends from (pos, rect) to the smallest subtree whose root rectangle
/// covers q. Descent consumes the child-index bits of q selected at the
/// positions where the current node splits; it stops at leaves, at exact
/// matches, and when q spans several children.
inline std::pair<std::size_t, Rectangle> search_descendant_impl(const Omnitree& tree,
                                                                const TreeIndex& index,
                                                                std::size_t pos, Rectangle rect,
                                                                const Rectangle& q) {
  const int d = tree.dimension();
  for (;;) {
    if (rect == q) return {pos, std::move(rect)};
    const Label l = tree.label(pos);
    if (l == 0) return {pos, std::move(rect)};
    bool deep_enough = true;
    for (int j = 0; j < d && deep_enough; ++j)
      if (label_bit(l, j) && q.level[std::size_t(j)] < rect.level[std::size_t(j)] + 1)
        deep_enough = false;
    if (!deep_enough) return {pos, std::move(rect)};  // q spans several children
    const int splits = label_popcount(l);
    unsigned ordinal = 0;
    int k = 0;
    for (int j = 0; j < d; ++j) {
      if (!label_bit(l, j)) continue;
      const unsigned bit = unsigned(
          (q.index[std::size_t(j)] >> (q.level[std::size_t(j)] - rect.level[std::size_t(j)] - 1)) &
          1u);
      ordinal |= bit << (splits - 1 - k);
      ++k;
    }
    pos = index.child(pos, ordinal);
    rect = rect.child(l, ordinal);
  }
}

/// Appends the uniform expansion of rectangle q toward target per-dimension
/// levels: every step splits all dimensions that still need refinement.
inline void emit_expansion(const Rectangle& q, const std::vector<int>& target,
                           std::vector<Label>& out) {
  Label split = 0;
  for (int j = 0; j < q.dimension(); ++j)
    if (int(q.level[std::size_t(j)]) < target[std::size_t(j)]) split |= Label(1) << j;
  out.push_back(split);
  if (split == 0) return;
  const unsigned children = 1u << label_popcount(split);
  for (unsigned c = 0; c < children; ++c) emit_expansion(q.child(split, c), target, out);
}

inline void construct_impl(const Omnitree& tree, const TreeIndex& index, const MarkerMap& markers,
                           const Rectangle& q, std::size_t s_pos, const Rectangle& s_rect,
                           std::vector<Label>& out) {
  auto [pos, rect] = search_descendant_impl(tree, index, s_pos, s_rect, q);
  const Label b = tree.label(pos);
  const auto it = markers.find(pos);
  const std::vector<int>* m = it == markers.end() ? nullptr : &it->second;
  const int d = tree.dimension();
  if (b == 0) {
    // Source leaf: expand the remaining marker. q may already sit deeper
    // than the leaf where ancestors realized lifted or slicing refinements;
    // those levels are accounted for, so the leaf's remaining marker adds
    // on top of q's level.
    std::vector<int> target(std::size_t(d), 0);
    for (int j = 0; j < d; ++j) {
      const int mj = m ? (*m)[std::size_t(j)] : 0;
      if (mj < 0) throw std::logic_error("negative marker reached a source leaf");
      target[std::size_t(j)] = int(q.level[std::size_t(j)]) + mj;
    }
    emit_expansion(q, target, out);
    return;
  }
  Label new_label = 0;
  for (int j = 0; j < d; ++j) {
    const int v = (label_bit(b, j) ? 1 : 0) + (m ? (*m)[std::size_t(j)] : 0);
    if (v < 0 || v > 1)
      throw std::logic_error("marker sweep left an unrealizable label entry");
    if (v == 1) new_label |= Label(1) << j;
  }
  if (new_label == 0)
    throw std::logic_error("construction reached a nonleaf with all splits removed");
  out.push_back(new_label);
  const unsigned children = 1u << label_popcount(new_label);
  for (unsigned c = 0; c < children; ++c)
    construct_impl(tree, index, markers, q.child(new_label, c), pos, rect, out);
}

}  // namespace detail

/// Smallest subtree of the subtree rooted at `subtree_root` whose rectangle
/// covers q; returns its preorder position.
inline std::size_t search_descendant(const Omnitree& tree, std::size_t subtree_root,
                                     const Rectangle& q) {
  const Rectangle root_rect = node_rectangle(tree, subtree_root);
  if (!root_rect.covers(q))
    throw std::invalid_argument("subtree rectangle does not cover the query rectangle");
  TreeIndex index(tree);
  return detail::search_descendant_impl(tree, index, subtree_root, root_rect, q).first;
}

/// Builds the target subtree for rectangle q from a marker-annotated source
/// subtree. Markers must already be resolved by the two sweeps.
inline Omnitree construct_new_tree(const Omnitree& tree, const MarkerMap& resolved,
                                   const Rectangle& q, std::size_t subtree_root) {
  const Rectangle root_rect = node_rectangle(tree, subtree_root);
  if (!root_rect.covers(q))
    throw std::invalid_argument("subtree rectangle does not cover the query rectangle");
  TreeIndex index(tree);
  std::vector<Label> out;
  detail::construct_impl(tree, index, resolved, q, subtree_root, root_rect, out);
  return Omnitree(tree.dimension(), std::move(out));
}

/// Canonical form: any split carried by all children of a node is hoisted
/// into the node itself, repeatedly, until no such node remains. A child's
/// bisection of a dimension its parent leaves unsplit cuts the parent box at
/// the parent's own midplane, so hoisting rearranges the tree without
/// changing the leaf partition.
inline Omnitree normalize(Omnitree tree) {
  const int d = tree.dimension();
  for (;;) {
    TreeIndex index(tree);
    MarkerMap markers;
    for (std::size_t pos = 0; pos < tree.node_count(); ++pos) {
      const Label l = tree.label(pos);
      if (l == 0) continue;
      const unsigned children = 1u << label_popcount(l);
      Label common = ~Label(0);
      std::vector<std::size_t> child_pos(children);
      std::size_t p = pos + 1;
      for (unsigned c = 0; c < children; ++c) {
        child_pos[c] = p;
        common &= tree.label(p);
        p = index.subtree_end(p);
      }
      const Label hoist = common & ~l;
      if (hoist == 0) continue;
      for (int j = 0; j < d; ++j) {
        if (!label_bit(hoist, j)) continue;
        detail::add_marker_entry(markers, d, pos, j, +1);
        for (unsigned c = 0; c < children; ++c)
          detail::add_marker_entry(markers, d, child_pos[c], j, -1);
      }
    }
    if (markers.empty()) return tree;
    tree = construct_new_tree(tree, markers, Rectangle::root(d), 0);
  }
}

/// Applies a refinement plan, producing a new tree in canonical form. The
/// plan's node ids refer to `tree` and are not valid for the result.
inline Omnitree refine(const Omnitree& tree, const RefinementPlan& plan) {
  if (plan.dimension() != tree.dimension() || plan.node_count() != tree.node_count())
    throw std::invalid_argument("plan was built for a different tree");
  if (plan.markers().empty()) return tree;
  MarkerMap resolved = sweep_down(tree, sweep_up(tree, plan.markers()));
  // The sweeps place every marker where it can be realized, but removing a
  // split from a node can expose a split shared by the surviving children
  // of one of its slices; canonicalize to restore the normal form.
  return normalize(
      construct_new_tree(tree, resolved, Rectangle::root(tree.dimension()), 0));
}

/// Debug rendering of per-node extended location codes with marker
/// annotations. Format is human-oriented and unstable.
inline std::string render_location_stack(const Omnitree& tree, const MarkerMap& markers) {
  TreeIndex index(tree);
  const int d = tree.dimension();
  std::ostringstream os;
  std::vector<std::pair<std::size_t, Rectangle>> stack;
  stack.push_back({0, Rectangle::root(d)});
  while (!stack.empty()) {
    auto [pos, rect] = std::move(stack.back());
    stack.pop_back();
    const Label l = tree.label(pos);
    for (int j = 0; j < d; ++j) {
      std::string cell = code_string(rect, j);
      if (label_bit(l, j)) cell += "L";  // lambda placeholder
      const int m = detail::marker_entry(markers, pos, j);
      for (int k = 0; k < m; ++k) cell += "+";
      for (int k = 0; k > m; --k) cell += "-";
      os << cell;
      os << (j + 1 < d ? " | " : "");
    }
    os << "\n";
    if (l == 0) continue;
    const unsigned children = 1u << label_popcount(l);
    std::vector<std::size_t> child_pos(children);
    std::size_t p = pos + 1;
    for (unsigned c = 0; c < children; ++c) {
      child_pos[c] = p;
      p = index.subtree_end(p);
    }
    for (unsigned c = children; c-- > 0;) stack.push_back({child_pos[c], rect.child(l, c)});
  }
  return os.str();
}

}  // namespace omnitree

#endif  // OMNITREE_REFINEMENT_HPP
