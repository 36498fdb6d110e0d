#ifndef OMNITREE_ORACLES_HPP
#define OMNITREE_ORACLES_HPP

// Ground-truth membership functions.
//
// A ShapeOracle answers "is this point inside the object" deterministically.
// Bases are 3-d (analytic primitives or watertight triangle meshes,
// normalized into the unit cube); a 3-d shape can be lifted to 4-d by a
// time-dependent rotation around the cube diagonal with per-time rescaling.
//
// Mesh containment uses a ray-parity test against a triangle BVH. A fixed
// primary ray direction is tried first; when a ray passes suspiciously close
// to a vertex or edge the test retries with the next direction from a fixed
// list of irrational-slope fallbacks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace omnitree {

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
  double operator[](int j) const { return j == 0 ? x : (j == 1 ? y : z); }
  double& operator[](int j) { return j == 0 ? x : (j == 1 ? y : z); }
};

struct Mat3 {
  std::array<std::array<double, 3>, 3> m{};

  static Mat3 identity() {
    Mat3 r;
    for (int i = 0; i < 3; ++i) r.m[i][i] = 1.0;
    return r;
  }

  /// Rodrigues rotation by `angle` around the unit axis.
  static Mat3 rotation(const Vec3& axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    const double ux = axis.x, uy = axis.y, uz = axis.z;
    Mat3 r;
    r.m = {{{c + ux * ux * t, ux * uy * t - uz * s, ux * uz * t + uy * s},
            {uy * ux * t + uz * s, c + uy * uy * t, uy * uz * t - ux * s},
            {uz * ux * t - uy * s, uz * uy * t + ux * s, c + uz * uz * t}}};
    return r;
  }

  Vec3 apply(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }

  /// For rotations the transpose is the inverse.
  Vec3 apply_transposed(const Vec3& v) const {
    return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
  }
};

struct Box3 {
  Vec3 lo, hi;

  void expand(const Vec3& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  static Box3 empty() {
    const double inf = std::numeric_limits<double>::infinity();
    return {{inf, inf, inf}, {-inf, -inf, -inf}};
  }
};

inline const Vec3 kDomainCenter = {0.5, 0.5, 0.5};

/// Deterministic point-membership function on [0,1]^d.
class ShapeOracle {
 public:
  virtual ~ShapeOracle() = default;
  virtual int dimension() const = 0;
  virtual bool contains(std::span<const double> x) const = 0;
};

/// 3-d shape that additionally knows the axis-aligned bounds of any rotated
/// copy of itself (rotation about the domain center). Needed for the
/// per-time rescaling of the 4-d lift.
class Shape3 : public ShapeOracle {
 public:
  int dimension() const final { return 3; }
  bool contains(std::span<const double> x) const final {
    return contains3({x[0], x[1], x[2]});
  }
  virtual bool contains3(const Vec3& p) const = 0;
  virtual Box3 rotated_bounds(const Mat3& rot) const = 0;
};

namespace detail {

inline Box3 rotated_corner_bounds(std::span<const Vec3> corners, const Mat3& rot) {
  Box3 box = Box3::empty();
  for (const auto& c : corners) box.expand(kDomainCenter + rot.apply(c - kDomainCenter));
  return box;
}

}  // namespace detail

/// The full unit cube; every domain point is inside.
class CubeShape final : public Shape3 {
 public:
  bool contains3(const Vec3& p) const override {
    return p.x >= 0 && p.x <= 1 && p.y >= 0 && p.y <= 1 && p.z >= 0 && p.z <= 1;
  }
  Box3 rotated_bounds(const Mat3& rot) const override {
    std::array<Vec3, 8> corners;
    for (int c = 0; c < 8; ++c)
      corners[std::size_t(c)] = {double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)};
    return detail::rotated_corner_bounds(corners, rot);
  }
};

/// Ball of radius 1/2 centered in the cube.
class SphereShape final : public Shape3 {
 public:
  bool contains3(const Vec3& p) const override {
    const Vec3 w = p - kDomainCenter;
    return w.dot(w) <= 0.25;
  }
  Box3 rotated_bounds(const Mat3&) const override { return {{0, 0, 0}, {1, 1, 1}}; }
};

/// Corner simplex x + y + z <= 1 inside the unit cube.
class TetrahedronShape final : public Shape3 {
 public:
  bool contains3(const Vec3& p) const override {
    return p.x >= 0 && p.y >= 0 && p.z >= 0 && p.x + p.y + p.z <= 1.0;
  }
  Box3 rotated_bounds(const Mat3& rot) const override {
    const std::array<Vec3, 4> corners = {Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0},
                                         Vec3{0, 0, 1}};
    return detail::rotated_corner_bounds(corners, rot);
  }
};

/// Points with x_axis < c inside the unit cube.
class HalfspaceShape final : public Shape3 {
 public:
  HalfspaceShape(int axis, double threshold) : axis_(axis), threshold_(threshold) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("halfspace axis must be 0..2");
    if (!(threshold > 0.0 && threshold < 1.0))
      throw std::invalid_argument("halfspace threshold must lie in (0,1)");
  }
  bool contains3(const Vec3& p) const override {
    if (p.x < 0 || p.x > 1 || p.y < 0 || p.y > 1 || p.z < 0 || p.z > 1) return false;
    return p[axis_] < threshold_;
  }
  Box3 rotated_bounds(const Mat3& rot) const override {
    std::array<Vec3, 8> corners;
    for (int c = 0; c < 8; ++c) {
      Vec3 v = {double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)};
      if (v[axis_] == 1.0) v[axis_] = threshold_;
      corners[std::size_t(c)] = v;
    }
    return detail::rotated_corner_bounds(corners, rot);
  }

 private:
  int axis_;
  double threshold_;
};

/// Cylinder of radius 0.05 and length 1, tilted by pi/4 around (1,1,0) and
/// normalized into the unit cube.
class RodShape final : public Shape3 {
 public:
  RodShape() {
    const Vec3 tilt_axis = Vec3{1, 1, 0}.normalized();
    axis_ = Mat3::rotation(tilt_axis, std::numbers::pi / 4).apply({0, 0, 1});
    // Bounds of the tilted cylinder centered at the origin.
    double max_extent = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double h = 0.5 * std::abs(axis_[j]) +
                       0.05 * std::sqrt(std::max(0.0, 1.0 - axis_[j] * axis_[j]));
      max_extent = std::max(max_extent, 2.0 * h);
    }
    const double s = 1.0 / max_extent;
    half_length_ = s * 0.5;
    radius_ = s * 0.05;
  }

  bool contains3(const Vec3& p) const override {
    const Vec3 w = p - kDomainCenter;
    const double along = w.dot(axis_);
    if (std::abs(along) > half_length_) return false;
    const double radial_sq = w.dot(w) - along * along;
    return radial_sq <= radius_ * radius_;
  }

  Box3 rotated_bounds(const Mat3& rot) const override {
    const Vec3 a = rot.apply(axis_);
    Box3 box;
    for (int j = 0; j < 3; ++j) {
      const double h = half_length_ * std::abs(a[j]) +
                       radius_ * std::sqrt(std::max(0.0, 1.0 - a[j] * a[j]));
      box.lo[j] = kDomainCenter[j] - h;
      box.hi[j] = kDomainCenter[j] + h;
    }
    return box;
  }

 private:
  Vec3 axis_;
  double half_length_ = 0;
  double radius_ = 0;
};

// ---------------------------------------------------------------------------
// Triangle meshes

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

/// Rejects meshes that are not closed 2-manifolds with consistent
/// orientation: every directed edge must occur exactly once and be matched
/// by its reverse.
inline void validate_watertight(const TriangleMesh& mesh) {
  if (mesh.triangles.size() < 4) throw MeshError("mesh has too few triangles to be closed");
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : mesh.triangles) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw MeshError("mesh contains a degenerate triangle");
    for (int e = 0; e < 3; ++e) {
      const auto a = t[std::size_t(e)], b = t[std::size_t((e + 1) % 3)];
      if (a >= mesh.vertices.size() || b >= mesh.vertices.size())
        throw MeshError("triangle index out of range");
      if (++directed[{a, b}] > 1)
        throw MeshError("mesh is not watertight: repeated directed edge");
    }
  }
  for (const auto& [edge, count] : directed) {
    const auto rev = directed.find({edge.second, edge.first});
    if (rev == directed.end())
      throw MeshError("mesh is not watertight: unmatched edge");
  }
}

/// Translates and uniformly scales so the largest axis-aligned extent spans
/// exactly [0,1] and the other dimensions are centered around 0.5.
inline TriangleMesh normalize_mesh(TriangleMesh mesh) {
  if (mesh.vertices.empty()) throw MeshError("empty mesh");
  Box3 box = Box3::empty();
  for (const auto& v : mesh.vertices) box.expand(v);
  double max_extent = 0.0;
  for (int j = 0; j < 3; ++j) max_extent = std::max(max_extent, box.hi[j] - box.lo[j]);
  if (max_extent <= 0.0) throw MeshError("mesh has zero extent");
  const double s = 1.0 / max_extent;
  Vec3 offset;
  for (int j = 0; j < 3; ++j)
    offset[j] = 0.5 * (1.0 - s * (box.hi[j] - box.lo[j]));
  for (auto& v : mesh.vertices)
    for (int j = 0; j < 3; ++j) v[j] = s * (v[j] - box.lo[j]) + offset[j];
  return mesh;
}

namespace detail {

/// Exact-coordinate vertex welding (STL repeats vertices per facet).
class VertexWelder {
 public:
  std::uint32_t add(const Vec3& v, TriangleMesh& mesh) {
    const auto key = std::array<double, 3>{v.x, v.y, v.z};
    const auto [it, inserted] = index_.try_emplace(key, std::uint32_t(mesh.vertices.size()));
    if (inserted) mesh.vertices.push_back(v);
    return it->second;
  }

 private:
  std::map<std::array<double, 3>, std::uint32_t> index_;
};

inline TriangleMesh load_stl_binary(const std::vector<char>& data) {
  if (data.size() < 84) throw MeshError("binary STL too short");
  std::uint32_t count = 0;
  std::memcpy(&count, data.data() + 80, 4);
  if (data.size() != 84 + std::size_t(count) * 50)
    throw MeshError("binary STL size does not match triangle count");
  TriangleMesh mesh;
  VertexWelder welder;
  for (std::uint32_t i = 0; i < count; ++i) {
    const char* rec = data.data() + 84 + std::size_t(i) * 50;
    std::array<std::uint32_t, 3> tri{};
    for (int v = 0; v < 3; ++v) {
      float c[3];
      std::memcpy(c, rec + 12 + v * 12, 12);  // skip the normal
      tri[std::size_t(v)] = welder.add({double(c[0]), double(c[1]), double(c[2])}, mesh);
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

inline TriangleMesh load_stl_ascii(const std::string& text) {
  TriangleMesh mesh;
  VertexWelder welder;
  std::istringstream in(text);
  std::string token;
  std::vector<std::uint32_t> pending;
  while (in >> token) {
    if (token != "vertex") continue;
    double x, y, z;
    if (!(in >> x >> y >> z)) throw MeshError("malformed ASCII STL vertex");
    pending.push_back(welder.add({x, y, z}, mesh));
    if (pending.size() == 3) {
      mesh.triangles.push_back({pending[0], pending[1], pending[2]});
      pending.clear();
    }
  }
  if (!pending.empty()) throw MeshError("ASCII STL facet with fewer than 3 vertices");
  return mesh;
}

inline TriangleMesh load_obj(const std::string& text) {
  TriangleMesh mesh;
  std::istringstream in(text);
  std::string line;
  auto face_index = [&mesh](std::string field) -> std::uint32_t {
    const auto slash = field.find('/');
    if (slash != std::string::npos) field = field.substr(0, slash);
    const long idx = std::stol(field);
    if (idx == 0) throw MeshError("OBJ face index 0");
    const long resolved = idx > 0 ? idx - 1 : long(mesh.vertices.size()) + idx;
    if (resolved < 0 || resolved >= long(mesh.vertices.size()))
      throw MeshError("OBJ face index out of range");
    return std::uint32_t(resolved);
  };
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    if (head == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw MeshError("malformed OBJ vertex");
      mesh.vertices.push_back({x, y, z});
    } else if (head == "f") {
      std::vector<std::uint32_t> poly;
      std::string field;
      while (ls >> field) poly.push_back(face_index(field));
      if (poly.size() < 3) throw MeshError("OBJ face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k)
        mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  return mesh;
}

}  // namespace detail

/// Reads STL (binary or ASCII) or OBJ by extension. The result is raw
/// geometry; callers normalize and validate.
inline TriangleMesh load_mesh(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshError("cannot open mesh file: " + path);
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto lower = path;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  if (lower.ends_with(".obj")) return detail::load_obj(std::string(data.begin(), data.end()));
  if (!lower.ends_with(".stl")) throw MeshError("unsupported mesh format: " + path);
  // Binary STL has an exact record layout; anything else is treated as ASCII.
  if (data.size() >= 84) {
    std::uint32_t count = 0;
    std::memcpy(&count, data.data() + 80, 4);
    if (data.size() == 84 + std::size_t(count) * 50) return detail::load_stl_binary(data);
  }
  return detail::load_stl_ascii(std::string(data.begin(), data.end()));
}

// ---------------------------------------------------------------------------
// Ray-parity mesh containment

namespace detail {

/// Fixed query directions: one primary plus seven irrational-slope
/// fallbacks for near-degenerate hits.
inline const std::array<Vec3, 8>& ray_directions() {
  static const std::array<Vec3, 8> dirs = [] {
    std::array<Vec3, 8> d = {Vec3{1.0, std::sqrt(2.0), std::sqrt(3.0)},
                             Vec3{std::sqrt(5.0), 1.0, std::sqrt(2.0)},
                             Vec3{std::sqrt(3.0), std::sqrt(7.0), 1.0},
                             Vec3{1.0, std::sqrt(11.0), std::sqrt(5.0)},
                             Vec3{std::sqrt(13.0), std::sqrt(3.0), std::sqrt(11.0)},
                             Vec3{std::sqrt(7.0), std::sqrt(17.0), std::sqrt(13.0)},
                             Vec3{std::sqrt(19.0), std::sqrt(5.0), std::sqrt(7.0)},
                             Vec3{std::sqrt(2.0), std::sqrt(23.0), std::sqrt(19.0)}};
    for (auto& v : d) v = v.normalized();
    return d;
  }();
  return dirs;
}

/// Alternate direction set, used by tests to confirm that the answer does
/// not depend on the rays chosen.
inline const std::array<Vec3, 8>& alternate_ray_directions() {
  static const std::array<Vec3, 8> dirs = [] {
    std::array<Vec3, 8> d = ray_directions();
    for (auto& v : d) v = Vec3{-v.x, -v.y, v.z}.normalized();
    return d;
  }();
  return dirs;
}

struct BvhNode {
  Box3 box;
  std::int32_t left = -1, right = -1;  // internal nodes
  std::int32_t first = 0, count = 0;   // leaves reference triangle ids
};

}  // namespace detail

/// Watertight triangle mesh with a bounding-volume tree for containment
/// queries. Input is normalized and validated on construction.
class MeshShape final : public Shape3 {
 public:
  explicit MeshShape(TriangleMesh mesh) : mesh_(normalize_mesh(std::move(mesh))) {
    validate_watertight(mesh_);
    tri_order_.resize(mesh_.triangles.size());
    for (std::size_t i = 0; i < tri_order_.size(); ++i) tri_order_[i] = std::int32_t(i);
    build(0, std::int32_t(tri_order_.size()));
  }

  const TriangleMesh& mesh() const { return mesh_; }

  bool contains3(const Vec3& p) const override {
    return contains_with_directions(p, detail::ray_directions());
  }

  /// Parity query against an explicit direction list (see tests). The first
  /// direction with no grazing hit decides; if every direction grazes, the
  /// raw parities are put to a majority vote.
  bool contains_with_directions(const Vec3& p, std::span<const Vec3> directions) const {
    int votes_inside = 0, votes = 0;
    for (const auto& dir : directions) {
      const auto [crossings, clean] = ray_parity(p, dir);
      if (clean) return (crossings & 1) != 0;
      ++votes;
      votes_inside += crossings & 1;
    }
    return 2 * votes_inside > votes;
  }

  Box3 rotated_bounds(const Mat3& rot) const override {
    Box3 box = Box3::empty();
    for (const auto& v : mesh_.vertices) box.expand(kDomainCenter + rot.apply(v - kDomainCenter));
    return box;
  }

 private:
  static constexpr double kGrazeEps = 1e-9;

  /// Crossing count along p + t*dir for t > 0, plus a cleanliness flag that
  /// is false when any hit grazed a triangle boundary within kGrazeEps.
  std::pair<int, bool> ray_parity(const Vec3& origin, const Vec3& dir) const {
    int crossings = 0;
    bool clean = true;
    std::array<std::int32_t, 96> stack;
    int top = 0;
    stack[std::size_t(top++)] = 0;
    const Vec3 inv = {1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    while (top > 0) {
      const auto& node = nodes_[std::size_t(stack[std::size_t(--top)])];
      if (!ray_hits_box(origin, inv, node.box)) continue;
      if (node.left >= 0) {
        stack[std::size_t(top++)] = node.left;
        stack[std::size_t(top++)] = node.right;
        continue;
      }
      for (std::int32_t k = node.first; k < node.first + node.count; ++k) {
        const auto& t = mesh_.triangles[std::size_t(tri_order_[std::size_t(k)])];
        const auto hit = intersect(origin, dir, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                   mesh_.vertices[t[2]]);
        if (hit == Hit::kDegenerate) clean = false;
        if (hit == Hit::kCrossing) ++crossings;
      }
    }
    return {crossings, clean};
  }

  enum class Hit { kMiss, kCrossing, kDegenerate };

  static Hit intersect(const Vec3& origin, const Vec3& dir, const Vec3& v0, const Vec3& v1,
                       const Vec3& v2) {
    const Vec3 e1 = v1 - v0, e2 = v2 - v0;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-12) {
      // Ray parallel to the triangle plane. Only suspicious if the plane is
      // close to the ray origin's projection onto the triangle region; be
      // conservative and retry whenever the origin is near the plane slab.
      const Vec3 n = e1.cross(e2);
      const double nn = n.norm();
      if (nn > 0 && std::abs(n.dot(origin - v0)) / nn < kGrazeEps) return Hit::kDegenerate;
      return Hit::kMiss;
    }
    const double inv_det = 1.0 / det;
    const Vec3 tv = origin - v0;
    const double u = tv.dot(pv) * inv_det;
    if (u < -kGrazeEps || u > 1.0 + kGrazeEps) return Hit::kMiss;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv_det;
    if (v < -kGrazeEps || u + v > 1.0 + kGrazeEps) return Hit::kMiss;
    const double t = e2.dot(qv) * inv_det;
    if (t < -kGrazeEps) return Hit::kMiss;
    if (t < kGrazeEps) return Hit::kDegenerate;  // origin on the surface
    if (u < kGrazeEps || v < kGrazeEps || u + v > 1.0 - kGrazeEps) return Hit::kDegenerate;
    return Hit::kCrossing;
  }

  static bool ray_hits_box(const Vec3& origin, const Vec3& inv_dir, const Box3& box) {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 3; ++j) {
      const double t1 = (box.lo[j] - origin[j]) * inv_dir[j];
      const double t2 = (box.hi[j] - origin[j]) * inv_dir[j];
      tmin = std::max(tmin, std::min(t1, t2));
      tmax = std::min(tmax, std::max(t1, t2));
    }
    return tmax >= tmin - 1e-12;
  }

  Box3 triangle_box(std::int32_t tri) const {
    const auto& t = mesh_.triangles[std::size_t(tri)];
    Box3 box = Box3::empty();
    for (int v = 0; v < 3; ++v) box.expand(mesh_.vertices[t[std::size_t(v)]]);
    return box;
  }

  std::int32_t build(std::int32_t first, std::int32_t count) {
    detail::BvhNode node;
    node.box = Box3::empty();
    for (std::int32_t k = first; k < first + count; ++k) {
      const Box3 tb = triangle_box(tri_order_[std::size_t(k)]);
      node.box.expand(tb.lo);
      node.box.expand(tb.hi);
    }
    const auto id = std::int32_t(nodes_.size());
    nodes_.push_back(node);
    if (count <= 4) {
      nodes_[std::size_t(id)].first = first;
      nodes_[std::size_t(id)].count = count;
      return id;
    }
    // Median split along the widest axis of the centroid bounds.
    int axis = 0;
    double widest = -1;
    for (int j = 0; j < 3; ++j) {
      const double w = node.box.hi[j] - node.box.lo[j];
      if (w > widest) {
        widest = w;
        axis = j;
      }
    }
    const auto mid = first + count / 2;
    std::nth_element(tri_order_.begin() + first, tri_order_.begin() + mid,
                     tri_order_.begin() + first + count,
                     [this, axis](std::int32_t a, std::int32_t b) {
                       const auto ca = triangle_box(a), cb = triangle_box(b);
                       return ca.lo[axis] + ca.hi[axis] < cb.lo[axis] + cb.hi[axis];
                     });
    const auto left = build(first, mid - first);
    const auto right = build(mid, first + count - mid);
    nodes_[std::size_t(id)].left = left;
    nodes_[std::size_t(id)].right = right;
    return id;
  }

  TriangleMesh mesh_;
  std::vector<std::int32_t> tri_order_;
  std::vector<detail::BvhNode> nodes_;
};

// ---------------------------------------------------------------------------
// Time-dependent rotation to 4-d

/// Lifts a 3-d shape to 4-d: at time t the object is rotated by 2*pi*t
/// around the cube diagonal through the center and rescaled into the unit
/// cube. Periodic in t with period 1 by construction.
class TimeRotatedShape final : public ShapeOracle {
 public:
  explicit TimeRotatedShape(std::shared_ptr<const Shape3> base) : base_(std::move(base)) {}

  int dimension() const override { return 4; }

  bool contains(std::span<const double> x) const override {
    const double t = x[3] - std::floor(x[3]);
    const double angle = 2.0 * std::numbers::pi * t;
    const Mat3 rot = Mat3::rotation(kDiagonalAxis, angle);
    const Box3 box = base_->rotated_bounds(rot);
    double max_extent = 0.0;
    for (int j = 0; j < 3; ++j) max_extent = std::max(max_extent, box.hi[j] - box.lo[j]);
    const double s = 1.0 / max_extent;
    // Invert the unit-cube normalization of the rotated object, then undo
    // the rotation and ask the base shape.
    Vec3 y;
    for (int j = 0; j < 3; ++j) {
      const double offset = 0.5 * (1.0 - s * (box.hi[j] - box.lo[j]));
      y[j] = box.lo[j] + (x[std::size_t(j)] - offset) / s;
    }
    const Vec3 p = kDomainCenter + rot.apply_transposed(y - kDomainCenter);
    return base_->contains3(p);
  }

 private:
  static inline const Vec3 kDiagonalAxis = Vec3{1, 1, 1}.normalized();
  std::shared_ptr<const Shape3> base_;
};

inline std::shared_ptr<const ShapeOracle> rotate_time(std::shared_ptr<const Shape3> base) {
  return std::make_shared<TimeRotatedShape>(std::move(base));
}

// ---------------------------------------------------------------------------
// Shape grammar

/// Parses `cube | sphere | tetrahedron | rod | halfspace:<axis>:<c> |
/// mesh:<path>`, optionally lifted to 4-d by the time rotation.
inline std::shared_ptr<const ShapeOracle> make_shape(const std::string& spec,
                                                     bool time_rotate = false) {
  std::shared_ptr<const Shape3> base;
  if (spec == "cube") {
    base = std::make_shared<CubeShape>();
  } else if (spec == "sphere") {
    base = std::make_shared<SphereShape>();
  } else if (spec == "tetrahedron") {
    base = std::make_shared<TetrahedronShape>();
  } else if (spec == "rod") {
    base = std::make_shared<RodShape>();
  } else if (spec.starts_with("halfspace:")) {
    const auto rest = spec.substr(10);
    const auto colon = rest.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("halfspace spec must be halfspace:<axis>:<c>");
    base = std::make_shared<HalfspaceShape>(std::stoi(rest.substr(0, colon)),
                                            std::stod(rest.substr(colon + 1)));
  } else if (spec.starts_with("mesh:")) {
    base = std::make_shared<MeshShape>(load_mesh(spec.substr(5)));
  } else {
    throw std::invalid_argument("unknown shape spec: " + spec);
  }
  if (time_rotate) return rotate_time(std::move(base));
  return base;
}

}  // namespace omnitree

#endif  // OMNITREE_ORACLES_HPP
