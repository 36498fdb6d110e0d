#ifndef OMNITREE_CODEC_HPP
#define OMNITREE_CODEC_HPP

// Bit-exact serialization.
//
// Three blob kinds share the same conventions: integers little-endian, bits
// packed most-significant-bit first, payload zero-padded to a byte boundary.
//
//   "OMNI"  tree descriptor   header: magic(4) version(1)=1 d(u16) nodes(u64)
//                             payload: nodes x d bits, preorder labels,
//                             bits b_0..b_{d-1} per node
//   "OMNO"  octree descriptor header: same layout as OMNI
//                             payload: 1 bit per node (1 = split all dims)
//   "OMNG"  leaf data vector  header: magic(4) version(1)=1 leaves(u64)
//                             bits_per_leaf(u8, =1 in v1)
//                             payload: leaves x bits_per_leaf bits, Z order

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnitree/core.hpp"

namespace omnitree {

/// One bit per leaf in Z order (values 0/1).
using BinaryField = std::vector<std::uint8_t>;

struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotAnOctreeError : CodecError {
  using CodecError::CodecError;
};

namespace detail {

class BitWriter {
 public:
  void push(bool bit) {
    if (fill_ == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= std::uint8_t(1u << (7 - fill_));
    fill_ = (fill_ + 1) % 8;
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  int fill_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  bool read() {
    if (pos_ >= bytes_.size() * 8) throw CodecError("premature end of payload");
    const bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return bit;
  }
  std::size_t bits_read() const { return pos_; }
  /// All bits from the cursor to the end of the buffer must be zero padding.
  void check_padding() const {
    for (std::size_t p = pos_; p < bytes_.size() * 8; ++p)
      if ((bytes_[p / 8] >> (7 - p % 8)) & 1u) throw CodecError("nonzero trailing bits");
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(std::uint8_t(v));
  out.push_back(std::uint8_t(v >> 8));
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> blob) : blob_(blob) {}
  void expect_magic(const char* magic) {
    if (blob_.size() < pos_ + 4) throw CodecError("blob too short for header");
    for (int i = 0; i < 4; ++i)
      if (blob_[pos_ + std::size_t(i)] != std::uint8_t(magic[i]))
        throw CodecError("magic mismatch");
    pos_ += 4;
  }
  std::uint8_t u8() {
    if (blob_.size() < pos_ + 1) throw CodecError("blob too short for header");
    return blob_[pos_++];
  }
  std::uint16_t u16() {
    if (blob_.size() < pos_ + 2) throw CodecError("blob too short for header");
    const std::uint16_t v = std::uint16_t(blob_[pos_] | (std::uint16_t(blob_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }
  std::uint64_t u64() {
    if (blob_.size() < pos_ + 8) throw CodecError("blob too short for header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(blob_[pos_ + std::size_t(i)]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::span<const std::uint8_t> payload(std::uint64_t payload_bits) const {
    const std::uint64_t need = (payload_bits + 7) / 8;
    const std::size_t have = blob_.size() - pos_;
    if (have < need) throw CodecError("premature end of payload");
    if (have > need) throw CodecError("trailing bytes after payload");
    return blob_.subspan(pos_);
  }

 private:
  std::span<const std::uint8_t> blob_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode(const Omnitree& tree) {
  std::vector<std::uint8_t> out = {'O', 'M', 'N', 'I', 1};
  detail::put_u16(out, std::uint16_t(tree.dimension()));
  detail::put_u64(out, tree.node_count());
  detail::BitWriter bits;
  for (const Label l : tree.labels())
    for (int j = 0; j < tree.dimension(); ++j) bits.push(label_bit(l, j));
  const auto payload = bits.take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline Omnitree decode(std::span<const std::uint8_t> blob) {
  detail::HeaderReader header(blob);
  header.expect_magic("OMNI");
  if (header.u8() != 1) throw CodecError("unsupported version");
  const int d = header.u16();
  const std::uint64_t nodes = header.u64();
  if (d < 1 || d > kMaxDimensions) throw CodecError("invalid dimension");
  if (nodes == 0) throw CodecError("empty tree");
  if (nodes > (std::uint64_t(1) << 48)) throw CodecError("implausible node count");
  detail::BitReader bits(header.payload(nodes * std::uint64_t(d)));
  std::vector<Label> labels;
  labels.reserve(nodes);
  std::size_t pending = 1;
  for (std::uint64_t i = 0; i < nodes; ++i) {
    if (pending == 0) throw CodecError("node count exceeds the tree walk");
    Label l = 0;
    for (int j = 0; j < d; ++j)
      if (bits.read()) l |= Label(1) << j;
    --pending;
    if (l != 0) pending += std::size_t(1) << label_popcount(l);
    labels.push_back(l);
  }
  if (pending != 0) throw CodecError("tree walk incomplete at the declared node count");
  bits.check_padding();
  try {
    return Omnitree(d, std::move(labels));
  } catch (const std::invalid_argument& e) {
    throw CodecError(std::string("decoded tree invalid: ") + e.what());
  }
}

inline std::vector<std::uint8_t> encode_octree(const Omnitree& tree) {
  if (!is_octree(tree))
    throw NotAnOctreeError("tree has anisotropic labels; octree coding unavailable");
  std::vector<std::uint8_t> out = {'O', 'M', 'N', 'O', 1};
  detail::put_u16(out, std::uint16_t(tree.dimension()));
  detail::put_u64(out, tree.node_count());
  detail::BitWriter bits;
  for (const Label l : tree.labels()) bits.push(l != 0);
  const auto payload = bits.take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline Omnitree decode_octree(std::span<const std::uint8_t> blob) {
  detail::HeaderReader header(blob);
  header.expect_magic("OMNO");
  if (header.u8() != 1) throw CodecError("unsupported version");
  const int d = header.u16();
  const std::uint64_t nodes = header.u64();
  if (d < 1 || d > kMaxDimensions) throw CodecError("invalid dimension");
  if (nodes == 0) throw CodecError("empty tree");
  if (nodes > (std::uint64_t(1) << 48)) throw CodecError("implausible node count");
  detail::BitReader bits(header.payload(nodes));
  const Label full = (Label(1) << d) - 1;
  std::vector<Label> labels;
  labels.reserve(nodes);
  std::size_t pending = 1;
  for (std::uint64_t i = 0; i < nodes; ++i) {
    if (pending == 0) throw CodecError("node count exceeds the tree walk");
    const Label l = bits.read() ? full : 0;
    --pending;
    if (l != 0) pending += std::size_t(1) << d;
    labels.push_back(l);
  }
  if (pending != 0) throw CodecError("tree walk incomplete at the declared node count");
  bits.check_padding();
  try {
    return Omnitree(d, std::move(labels));
  } catch (const std::invalid_argument& e) {
    throw CodecError(std::string("decoded tree invalid: ") + e.what());
  }
}

inline std::vector<std::uint8_t> encode_field(const BinaryField& field) {
  std::vector<std::uint8_t> out = {'O', 'M', 'N', 'G', 1};
  detail::put_u64(out, field.size());
  out.push_back(1);  // bits per leaf
  detail::BitWriter bits;
  for (const auto b : field) bits.push(b != 0);
  const auto payload = bits.take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline BinaryField decode_field(std::span<const std::uint8_t> blob) {
  detail::HeaderReader header(blob);
  header.expect_magic("OMNG");
  if (header.u8() != 1) throw CodecError("unsupported version");
  const std::uint64_t leaves = header.u64();
  const std::uint8_t width = header.u8();
  if (width != 1) throw CodecError("unsupported payload width");
  if (leaves == 0) throw CodecError("empty field");
  if (leaves > (std::uint64_t(1) << 48)) throw CodecError("implausible leaf count");
  detail::BitReader bits(header.payload(leaves));
  BinaryField field(leaves);
  for (std::uint64_t i = 0; i < leaves; ++i) field[i] = bits.read() ? 1 : 0;
  bits.check_padding();
  return field;
}

/// First four bytes of a blob, for CLI dispatch.
inline std::string blob_magic(std::span<const std::uint8_t> blob) {
  if (blob.size() < 4) throw CodecError("blob too short");
  return std::string(blob.begin(), blob.begin() + 4);
}

struct StorageReport {
  std::uint64_t tree_bits_omnitree = 0;             // d bits per node
  std::optional<std::uint64_t> tree_bits_octree;    // 1 bit per node, when applicable
  std::uint64_t data_bits = 0;
  std::uint64_t total_bits = 0;                     // omnitree coding + data
};

inline StorageReport storage_report(const Omnitree& tree, unsigned payload_bits_per_leaf) {
  StorageReport r;
  r.tree_bits_omnitree = std::uint64_t(tree.dimension()) * tree.node_count();
  if (is_octree(tree)) r.tree_bits_octree = tree.node_count();
  r.data_bits = std::uint64_t(payload_bits_per_leaf) * tree.leaf_count();
  r.total_bits = r.tree_bits_omnitree + r.data_bits;
  return r;
}

}  // namespace omnitree

#endif  // OMNITREE_CODEC_HPP
