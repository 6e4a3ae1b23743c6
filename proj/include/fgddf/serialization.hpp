#pragma once

// Little-endian binary encoding of canonical factors:
//   u32 scope count
//   per variable: u16 name length, name bytes (UTF-8), u32 timestep, u16 dim
//   zeta as f64[n], lambda row-major as f64[n*n]

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "fgddf/gaussian.hpp"

namespace fgddf {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    static_assert(std::is_unsigned_v<T>);
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw DecodeError("truncated buffer");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline void write_factor(ByteWriter& w, const CanonicalFactor& f) {
  w.put(static_cast<std::uint32_t>(f.scope().size()));
  for (const auto& k : f.scope()) {
    if (k.name.size() > 0xFFFF) throw std::length_error("variable name too long");
    w.put(static_cast<std::uint16_t>(k.name.size()));
    w.put_bytes({reinterpret_cast<const std::uint8_t*>(k.name.data()), k.name.size()});
    w.put(k.timestep);
    w.put(k.dim);
  }
  for (Eigen::Index i = 0; i < f.dim(); ++i) w.put_f64(f.zeta()(i));
  for (Eigen::Index r = 0; r < f.dim(); ++r)
    for (Eigen::Index c = 0; c < f.dim(); ++c) w.put_f64(f.lambda()(r, c));
}

inline CanonicalFactor read_factor(ByteReader& r) {
  const auto count = r.get<std::uint32_t>();
  Scope scope;
  scope.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    VariableKey k;
    const auto len = r.get<std::uint16_t>();
    const auto bytes = r.get_bytes(len);
    k.name.assign(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    k.timestep = r.get<std::uint32_t>();
    k.dim = r.get<std::uint16_t>();
    scope.push_back(std::move(k));
  }
  const auto n = static_cast<Eigen::Index>(scope_dim(scope));
  VectorXd zeta(n);
  MatrixXd lambda(n, n);
  for (Eigen::Index i = 0; i < n; ++i) zeta(i) = r.get_f64();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) lambda(i, j) = r.get_f64();
  return CanonicalFactor(std::move(scope), std::move(zeta), std::move(lambda));
}

inline std::vector<std::uint8_t> serialize_factor(const CanonicalFactor& f) {
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  write_factor(w, f);
  return out;
}

inline CanonicalFactor deserialize_factor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto f = read_factor(r);
  if (!r.done()) throw DecodeError("trailing bytes after factor");
  return f;
}

}  // namespace fgddf
