#ifndef OMNITREE_CORE_HPP
#define OMNITREE_CORE_HPP

// Omnitree core data model.
//
// An omnitree partitions the unit hypercube (0,1)^d into dyadic rectangles.
// Every node carries a d-bit label; bit j set means the node bisects
// dimension j, giving 2^popcount children. Leaf nodes carry the all-zero
// label. The whole tree is stored as the flat preorder sequence of labels,
// which is self-delimiting: walking it depth-first with 2^popcount children
// per nonzero label ends exactly at the end of the sequence.
//
// Child ordering follows the Z curve. For a node splitting dimensions
// j_0 < j_1 < ... < j_{k-1}, the child ordinal is built with the lowest
// split dimension as the most significant bit:
//   ordinal = sum_k e_{j_k} * 2^{k-1-index}
// where e_j = 0 selects the lower half in dimension j and e_j = 1 the upper.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace omnitree {

/// Node label; bit j (value 1 << j) marks a bisection of dimension j.
using Label = std::uint64_t;

inline constexpr int kMaxDimensions = 62;
inline constexpr int kMaxLevel = 62;

inline int label_popcount(Label label) { return std::popcount(label); }

inline bool label_bit(Label label, int dim) { return (label >> dim) & 1u; }

/// Renders a label as its bit string b_0 b_1 ... b_{d-1}.
inline std::string label_string(Label label, int dimension) {
  std::string s(std::size_t(dimension), '0');
  for (int j = 0; j < dimension; ++j)
    if (label_bit(label, j)) s[std::size_t(j)] = '1';
  return s;
}

/// Parses "101..." (b_0 first) into a Label. Convenience for tests and tools.
inline Label label_from_string(std::string_view bits) {
  Label label = 0;
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] == '1')
      label |= Label(1) << j;
    else if (bits[j] != '0')
      throw std::invalid_argument("label string must contain only 0/1");
  }
  return label;
}

/// Child ordinal for a per-split-dimension bit assignment. The assignment
/// must cover exactly the split dimensions of the label.
inline unsigned child_ordinal(Label label, int dimension,
                              std::span<const std::pair<int, int>> assignment) {
  const int splits = label_popcount(label);
  if (int(assignment.size()) != splits)
    throw std::invalid_argument("assignment must cover exactly the split dimensions");
  unsigned ordinal = 0;
  int k = 0;
  for (int j = 0; j < dimension; ++j) {
    if (!label_bit(label, j)) continue;
    const auto it = std::find_if(assignment.begin(), assignment.end(),
                                 [j](const auto& p) { return p.first == j; });
    if (it == assignment.end())
      throw std::invalid_argument("missing assignment for split dimension");
    if (it->second != 0 && it->second != 1)
      throw std::invalid_argument("assignment bits must be 0 or 1");
    ordinal |= unsigned(it->second) << (splits - 1 - k);
    ++k;
  }
  for (const auto& [dim, bit] : assignment)
    if (dim < 0 || dim >= dimension || !label_bit(label, dim))
      throw std::invalid_argument("assignment to a non-split dimension");
  return ordinal;
}

/// Bit of the ordinal that belongs to split dimension `dim` of `label`.
inline int child_bit(Label label, unsigned ordinal, int dim) {
  const int splits = label_popcount(label);
  int k = 0;
  for (int j = 0; j < dim; ++j)
    if (label_bit(label, j)) ++k;
  return int((ordinal >> (splits - 1 - k)) & 1u);
}

/// A dyadic box in level-index form: per-dimension refinement level and
/// integer index, lower corner index*2^-level, upper corner (index+1)*2^-level.
/// Doubles as the per-dimension location code of the box (the code string in
/// dimension j is the level_j most significant bits of index_j).
struct Rectangle {
  std::vector<std::uint8_t> level;
  std::vector<std::uint64_t> index;

  static Rectangle root(int dimension) {
    Rectangle r;
    r.level.assign(std::size_t(dimension), 0);
    r.index.assign(std::size_t(dimension), 0);
    return r;
  }

  int dimension() const { return int(level.size()); }

  double lower(int j) const {
    return std::ldexp(double(index[std::size_t(j)]), -int(level[std::size_t(j)]));
  }
  double upper(int j) const {
    return std::ldexp(double(index[std::size_t(j)]) + 1.0, -int(level[std::size_t(j)]));
  }

  double volume() const {
    int total = 0;
    for (auto l : level) total += l;
    return std::ldexp(1.0, -total);
  }

  /// Sub-rectangle selected by `ordinal` when bisecting the dimensions of
  /// `split`, using the Z-curve bit convention above.
  Rectangle child(Label split, unsigned ordinal) const {
    Rectangle c = *this;
    const int splits = label_popcount(split);
    int k = 0;
    for (int j = 0; j < dimension(); ++j) {
      if (!label_bit(split, j)) continue;
      if (c.level[std::size_t(j)] >= kMaxLevel)
        throw std::runtime_error("refinement level cap exceeded");
      const unsigned bit = (ordinal >> (splits - 1 - k)) & 1u;
      c.level[std::size_t(j)] = std::uint8_t(c.level[std::size_t(j)] + 1);
      c.index[std::size_t(j)] = (c.index[std::size_t(j)] << 1) | bit;
      ++k;
    }
    return c;
  }

  /// True if `q` lies within this box (dyadic containment).
  bool covers(const Rectangle& q) const {
    for (int j = 0; j < dimension(); ++j) {
      const auto lj = level[std::size_t(j)], lq = q.level[std::size_t(j)];
      if (lq < lj) return false;
      if ((q.index[std::size_t(j)] >> (lq - lj)) != index[std::size_t(j)]) return false;
    }
    return true;
  }

  /// Half-open containment test; the upper domain face x_j = 1 belongs to the
  /// last cell in dimension j.
  bool contains_point(std::span<const double> x) const {
    for (int j = 0; j < dimension(); ++j) {
      const double lo = lower(j), hi = upper(j);
      if (x[std::size_t(j)] < lo) return false;
      if (x[std::size_t(j)] >= hi && !(hi == 1.0 && x[std::size_t(j)] == 1.0)) return false;
    }
    return true;
  }

  bool operator==(const Rectangle&) const = default;
};

/// Lexicographic order on location codes: dimension by dimension, comparing
/// the per-dimension bit strings (a strict prefix sorts first).
inline bool code_less(const Rectangle& a, const Rectangle& b) {
  for (int j = 0; j < a.dimension(); ++j) {
    const int la = a.level[std::size_t(j)], lb = b.level[std::size_t(j)];
    const int common = std::min(la, lb);
    for (int k = 0; k < common; ++k) {
      const int ba = int((a.index[std::size_t(j)] >> (la - 1 - k)) & 1u);
      const int bb = int((b.index[std::size_t(j)] >> (lb - 1 - k)) & 1u);
      if (ba != bb) return ba < bb;
    }
    if (la != lb) return la < lb;
  }
  return false;
}

/// Stable 64-bit hash of a location code (used for RNG substreams and sets).
inline std::uint64_t code_hash(const Rectangle& r) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001B3ull;
  };
  mix(std::uint8_t(r.dimension()));
  for (int j = 0; j < r.dimension(); ++j) {
    mix(r.level[std::size_t(j)]);
    for (int i = 0; i < 8; ++i) mix(std::uint8_t(r.index[std::size_t(j)] >> (8 * i)));
  }
  return h;
}

/// Code string of one dimension, e.g. "01" for the second quarter at level 2.
inline std::string code_string(const Rectangle& r, int j) {
  std::string s;
  for (int k = 0; k < int(r.level[std::size_t(j)]); ++k)
    s += char('0' + ((r.index[std::size_t(j)] >> (r.level[std::size_t(j)] - 1 - k)) & 1u));
  return s;
}

/// Immutable omnitree: dimension count plus the preorder label sequence.
/// Construction validates self-delimitation, label width, and the level cap.
class Omnitree {
 public:
  Omnitree(int dimension, std::vector<Label> labels)
      : d_(dimension), labels_(std::move(labels)) {
    validate();
  }

  static Omnitree singleton(int dimension) {
    if (dimension < 1) throw std::invalid_argument("dimension must be >= 1");
    return Omnitree(dimension, {Label(0)});
  }

  int dimension() const { return d_; }
  std::size_t node_count() const { return labels_.size(); }
  std::size_t leaf_count() const { return leaf_count_; }
  Label label(std::size_t pos) const { return labels_[pos]; }
  const std::vector<Label>& labels() const { return labels_; }

  bool operator==(const Omnitree& other) const {
    return d_ == other.d_ && labels_ == other.labels_;
  }

 private:
  void validate() {
    if (d_ < 1 || d_ > kMaxDimensions) throw std::invalid_argument("invalid dimension");
    if (labels_.empty()) throw std::invalid_argument("empty label sequence");
    const Label mask = (d_ == 64) ? ~Label(0) : ((Label(1) << d_) - 1);
    // The walk tracks per-dimension levels to enforce the level cap, and a
    // pending-children count to enforce self-delimitation.
    std::vector<std::pair<Label, unsigned>> stack;  // (label, children left)
    std::vector<int> level(std::size_t(d_), 0);
    std::size_t pending = 1;
    leaf_count_ = 0;
    for (std::size_t pos = 0; pos < labels_.size(); ++pos) {
      if (pending == 0) throw std::invalid_argument("labels past the end of the tree walk");
      --pending;
      const Label l = labels_[pos];
      if (l & ~mask) throw std::invalid_argument("label has bits outside the dimension range");
      if (l == 0) {
        ++leaf_count_;
        // Close finished subtrees.
        while (!stack.empty()) {
          auto& [plabel, left] = stack.back();
          if (--left > 0) break;
          for (int j = 0; j < d_; ++j)
            if (label_bit(plabel, j)) --level[std::size_t(j)];
          stack.pop_back();
        }
      } else {
        for (int j = 0; j < d_; ++j) {
          if (!label_bit(l, j)) continue;
          if (++level[std::size_t(j)] > kMaxLevel)
            throw std::invalid_argument("refinement level cap exceeded");
        }
        pending += std::size_t(1) << label_popcount(l);
        stack.push_back({l, unsigned(1) << label_popcount(l)});
      }
    }
    if (pending != 0) throw std::invalid_argument("label sequence ends inside the tree walk");
  }

  int d_;
  std::vector<Label> labels_;
  std::size_t leaf_count_ = 0;
};

inline Omnitree singleton_tree(int dimension) { return Omnitree::singleton(dimension); }

/// Navigation index over an omnitree: subtree extents, leaf ranks and leaf
/// positions, built in one O(n) pass. Holds a pointer to the tree; the tree
/// must outlive the index.
class TreeIndex {
 public:
  explicit TreeIndex(const Omnitree& tree) : tree_(&tree) {
    const auto& labels = tree.labels();
    const std::size_t n = labels.size();
    subtree_end_.resize(n);
    leaves_before_.resize(n);
    leaf_pos_.reserve(tree.leaf_count());
    std::vector<std::pair<std::size_t, unsigned>> stack;  // (pos, children left)
    std::size_t rank = 0;
    for (std::size_t pos = 0; pos < n; ++pos) {
      leaves_before_[pos] = rank;
      if (labels[pos] == 0) {
        ++rank;
        leaf_pos_.push_back(pos);
        std::size_t end = pos + 1;
        subtree_end_[pos] = end;
        while (!stack.empty()) {
          auto& [p, left] = stack.back();
          if (--left > 0) break;
          subtree_end_[p] = end;
          stack.pop_back();
        }
      } else {
        stack.push_back({pos, unsigned(1) << label_popcount(labels[pos])});
      }
    }
  }

  const Omnitree& tree() const { return *tree_; }
  std::size_t subtree_end(std::size_t pos) const { return subtree_end_[pos]; }
  std::size_t leaves_before(std::size_t pos) const { return leaves_before_[pos]; }
  bool is_leaf(std::size_t pos) const { return tree_->label(pos) == 0; }
  std::size_t leaf_node(std::size_t leaf_ordinal) const { return leaf_pos_[leaf_ordinal]; }

  /// Position of the `ordinal`-th child of the nonleaf at `pos`.
  std::size_t child(std::size_t pos, unsigned ordinal) const {
    std::size_t c = pos + 1;
    while (ordinal-- > 0) c = subtree_end_[c];
    return c;
  }

  /// Leaf ordinal containing x (half-open cells, upper domain face folded
  /// into the last cell). Coordinates must lie in [0, 1].
  std::size_t locate(std::span<const double> x) const {
    const int d = tree_->dimension();
    if (int(x.size()) != d) throw std::invalid_argument("point dimension mismatch");
    for (int j = 0; j < d; ++j)
      if (!(x[std::size_t(j)] >= 0.0 && x[std::size_t(j)] <= 1.0))
        throw std::invalid_argument("coordinate outside [0,1]");
    std::vector<int> level(std::size_t(d), 0);
    std::vector<std::uint64_t> index(std::size_t(d), 0);
    std::size_t pos = 0;
    for (;;) {
      const Label l = tree_->label(pos);
      if (l == 0) return leaves_before_[pos];
      const int splits = label_popcount(l);
      unsigned ordinal = 0;
      int k = 0;
      for (int j = 0; j < d; ++j) {
        if (!label_bit(l, j)) continue;
        const double mid =
            std::ldexp(double(2 * index[std::size_t(j)] + 1), -(level[std::size_t(j)] + 1));
        const unsigned bit = x[std::size_t(j)] >= mid ? 1u : 0u;
        ordinal |= bit << (splits - 1 - k);
        level[std::size_t(j)] += 1;
        index[std::size_t(j)] = (index[std::size_t(j)] << 1) | bit;
        ++k;
      }
      pos = child(pos, ordinal);
    }
  }

 private:
  const Omnitree* tree_;
  std::vector<std::size_t> subtree_end_;
  std::vector<std::size_t> leaves_before_;
  std::vector<std::size_t> leaf_pos_;
};

/// Leaf boxes in depth-first Z order.
inline std::vector<Rectangle> leaf_rectangles(const Omnitree& tree) {
  TreeIndex index(tree);
  std::vector<Rectangle> out;
  out.reserve(tree.leaf_count());
  std::vector<std::pair<std::size_t, Rectangle>> stack;
  stack.push_back({0, Rectangle::root(tree.dimension())});
  while (!stack.empty()) {
    auto [pos, rect] = std::move(stack.back());
    stack.pop_back();
    const Label l = tree.label(pos);
    if (l == 0) {
      out.push_back(std::move(rect));
      continue;
    }
    const unsigned children = 1u << label_popcount(l);
    std::vector<std::size_t> child_pos(children);
    std::size_t p = pos + 1;
    for (unsigned c = 0; c < children; ++c) {
      child_pos[c] = p;
      p = index.subtree_end(p);
    }
    // Push in reverse so children pop in Z order.
    for (unsigned c = children; c-- > 0;) stack.push_back({child_pos[c], rect.child(l, c)});
  }
  return out;
}

/// Rectangle of the node at preorder position `pos` (O(n) walk).
inline Rectangle node_rectangle(const Omnitree& tree, std::size_t pos) {
  if (pos >= tree.node_count()) throw std::invalid_argument("node position out of range");
  std::vector<std::pair<std::size_t, Rectangle>> stack;
  stack.push_back({0, Rectangle::root(tree.dimension())});
  TreeIndex index(tree);
  std::size_t cur = 0;
  Rectangle rect = Rectangle::root(tree.dimension());
  while (cur != pos) {
    // Descend toward pos: pick the child whose subtree contains it.
    const Label l = tree.label(cur);
    const unsigned children = 1u << label_popcount(l);
    std::size_t p = cur + 1;
    for (unsigned c = 0; c < children; ++c) {
      const std::size_t end = index.subtree_end(p);
      if (pos < end) {
        rect = rect.child(l, c);
        cur = p;
        break;
      }
      p = end;
    }
  }
  return rect;
}

/// Leaf ordinal containing x. Convenience wrapper that builds a transient
/// index; use TreeIndex::locate in hot loops.
inline std::size_t locate(const Omnitree& tree, std::span<const double> x) {
  return TreeIndex(tree).locate(x);
}

struct NodeStats {
  std::size_t node_count = 0;
  std::size_t leaf_count = 0;
  double mean_leaf_depth = 0.0;
  std::vector<int> max_level;           // per-dimension maximum leaf level
  std::vector<std::size_t> split_count; // per-dimension number of bisections
};

inline NodeStats node_stats(const Omnitree& tree) {
  const int d = tree.dimension();
  NodeStats stats;
  stats.node_count = tree.node_count();
  stats.leaf_count = tree.leaf_count();
  stats.max_level.assign(std::size_t(d), 0);
  stats.split_count.assign(std::size_t(d), 0);
  std::vector<std::pair<std::size_t, Rectangle>> stack;
  std::vector<std::size_t> depth_stack;
  stack.push_back({0, Rectangle::root(d)});
  depth_stack.push_back(0);
  TreeIndex index(tree);
  double depth_sum = 0.0;
  while (!stack.empty()) {
    auto [pos, rect] = std::move(stack.back());
    stack.pop_back();
    const std::size_t depth = depth_stack.back();
    depth_stack.pop_back();
    const Label l = tree.label(pos);
    if (l == 0) {
      depth_sum += double(depth);
      for (int j = 0; j < d; ++j)
        stats.max_level[std::size_t(j)] =
            std::max(stats.max_level[std::size_t(j)], int(rect.level[std::size_t(j)]));
      continue;
    }
    for (int j = 0; j < d; ++j)
      if (label_bit(l, j)) ++stats.split_count[std::size_t(j)];
    const unsigned children = 1u << label_popcount(l);
    std::size_t p = pos + 1;
    std::vector<std::size_t> child_pos(children);
    for (unsigned c = 0; c < children; ++c) {
      child_pos[c] = p;
      p = index.subtree_end(p);
    }
    for (unsigned c = children; c-- > 0;) {
      stack.push_back({child_pos[c], rect.child(l, c)});
      depth_stack.push_back(depth + 1);
    }
  }
  stats.mean_leaf_depth = depth_sum / double(stats.leaf_count);
  return stats;
}

/// Checks the canonical-form condition: no node may leave a dimension
/// unsplit when every one of its children splits it.
inline bool is_normalized(const Omnitree& tree) {
  TreeIndex index(tree);
  const int d = tree.dimension();
  for (std::size_t pos = 0; pos < tree.node_count(); ++pos) {
    const Label l = tree.label(pos);
    if (l == 0) continue;
    const unsigned children = 1u << label_popcount(l);
    Label all_children_split = ~Label(0);
    std::size_t p = pos + 1;
    for (unsigned c = 0; c < children; ++c) {
      all_children_split &= tree.label(p);
      p = index.subtree_end(p);
    }
    for (int j = 0; j < d; ++j)
      if (!label_bit(l, j) && label_bit(all_children_split, j)) return false;
  }
  return true;
}

/// True if every label is all-zero or all-ones (isotropic special case).
inline bool is_octree(const Omnitree& tree) {
  const Label full = (tree.dimension() == 64) ? ~Label(0)
                                              : ((Label(1) << tree.dimension()) - 1);
  for (const Label l : tree.labels())
    if (l != 0 && l != full) return false;
  return true;
}

}  // namespace omnitree

#endif  // OMNITREE_CORE_HPP
