#ifndef OMNITREE_METRICS_HPP
#define OMNITREE_METRICS_HPP

// Evaluation: Monte Carlo L1 error, convergence rates, Shannon information
// density of the stored bit vector, and aggregate reports.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "omnitree/codec.hpp"
#include "omnitree/core.hpp"
#include "omnitree/oracles.hpp"
#include "omnitree/parallel.hpp"
#include "omnitree/rng.hpp"

namespace omnitree {

/// Mean absolute difference between the stored discretization and the truth
/// over n_e uniform samples of the domain. Binary data makes this an exact
/// mismatch count divided by n_e, so results are independent of the thread
/// count and summation order.
inline double l1_error(const Omnitree& tree, const BinaryField& field, const ShapeOracle& oracle,
                       std::size_t n_e, std::uint64_t seed, int threads = 1) {
  if (field.size() != tree.leaf_count())
    throw std::invalid_argument("field length does not match the leaf count");
  if (oracle.dimension() != tree.dimension())
    throw std::invalid_argument("oracle dimension does not match the tree");
  if (n_e == 0) throw std::invalid_argument("sample count must be positive");
  const int d = tree.dimension();
  const TreeIndex index(tree);
  constexpr std::size_t kChunk = 1u << 16;
  const std::size_t chunks = (n_e + kChunk - 1) / kChunk;
  std::vector<std::size_t> mismatches(chunks, 0);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t count = std::min(kChunk, n_e - c * kChunk);
    RandomStream rs(seed, SubstreamKey(StreamPurpose::kEval)
                              .add_u64(tree.leaf_count())
                              .add_u64(c));
    std::vector<double> x(std::size_t(d), 0.0);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < count; ++i) {
      for (int j = 0; j < d; ++j) x[std::size_t(j)] = rs.next_double();
      const int approx = field[index.locate(x)];
      const int truth = oracle.contains(x) ? 1 : 0;
      bad += std::size_t(approx != truth);
    }
    mismatches[c] = bad;
  });
  std::size_t total = 0;
  for (const auto m : mismatches) total += m;
  return double(total) / double(n_e);
}

/// Error-decay exponent r = log(e1/e2) / log(N2/N1). Returns nullopt when an
/// error is zero or negative (resolution is already perfect).
inline std::optional<double> convergence_rate(double e1, std::size_t n1, double e2,
                                              std::size_t n2) {
  if (n1 < 1 || n2 <= n1) throw std::invalid_argument("need n2 > n1 >= 1");
  if (e1 <= 0.0 || e2 <= 0.0) return std::nullopt;
  return std::log(e1 / e2) / std::log(double(n2) / double(n1));
}

/// Shannon information density of the bit vector, in [0, 1].
inline double information_density(const BinaryField& field) {
  if (field.empty()) throw std::invalid_argument("empty field");
  std::size_t ones = 0;
  for (const auto b : field) ones += b;
  const double p1 = double(ones) / double(field.size());
  const double p0 = 1.0 - p1;
  auto term = [](double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; };
  return term(p0) + term(p1);
}

enum class TreeCoding { kOmnitree, kOctree };

struct EvalResult {
  std::size_t leaves = 0;
  double l1 = 0.0;
  std::uint64_t tree_bits = 0;
  std::uint64_t data_bits = 0;
  double info_density = 0.0;
  std::size_t n_e = 0;
  std::uint64_t seed = 0;

  bool operator==(const EvalResult&) const = default;
};

inline EvalResult evaluate(const Omnitree& tree, const BinaryField& field,
                           const ShapeOracle& oracle, std::size_t n_e, std::uint64_t seed,
                           TreeCoding coding, int threads = 1) {
  EvalResult r;
  r.leaves = tree.leaf_count();
  r.l1 = l1_error(tree, field, oracle, n_e, seed, threads);
  const auto storage = storage_report(tree, 1);
  if (coding == TreeCoding::kOctree) {
    if (!storage.tree_bits_octree.has_value())
      throw std::invalid_argument("tree is not octree-codable");
    r.tree_bits = *storage.tree_bits_octree;
  } else {
    r.tree_bits = storage.tree_bits_omnitree;
  }
  r.data_bits = storage.data_bits;
  r.info_density = information_density(field);
  r.n_e = n_e;
  r.seed = seed;
  return r;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Flat JSON object with deterministic formatting and key order.
inline std::string to_json(const EvalResult& r) {
  std::string out = "{";
  out += "\"N\":" + std::to_string(r.leaves);
  out += ",\"data_bits\":" + std::to_string(r.data_bits);
  out += ",\"info_density\":" + detail::format_double(r.info_density);
  out += ",\"l1_error\":" + detail::format_double(r.l1);
  out += ",\"n_e\":" + std::to_string(r.n_e);
  out += ",\"seed\":" + std::to_string(r.seed);
  out += ",\"tree_bits\":" + std::to_string(r.tree_bits);
  out += "}";
  return out;
}

struct SweepRow {
  std::string shape;
  std::string mode;
  int d = 0;
  std::size_t leaves = 0;
  double l1 = 0.0;
  std::optional<double> rate;  // vs. the previous ladder point of this run
  std::uint64_t tree_bits = 0;
  std::uint64_t data_bits = 0;
  double info_density = 0.0;
  std::uint64_t seed = 0;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "shape,mode,d,N,l1_error,rate,tree_bits,data_bits,info_density,seed\n";
  for (const auto& r : rows) {
    out += r.shape + "," + r.mode + "," + std::to_string(r.d) + "," + std::to_string(r.leaves);
    out += "," + detail::format_double(r.l1);
    out += ",";
    if (r.rate.has_value()) out += detail::format_double(*r.rate);
    out += "," + std::to_string(r.tree_bits) + "," + std::to_string(r.data_bits);
    out += "," + detail::format_double(r.info_density) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

}  // namespace omnitree

#endif  // OMNITREE_METRICS_HPP
