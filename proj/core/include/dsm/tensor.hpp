#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsm {

using Real = double;

/// Thrown when operand extents do not agree. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;

  std::size_t size() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

struct Shape5 {
  std::size_t n = 0, c = 0, d = 0, h = 0, w = 0;

  std::size_t size() const { return n * c * d * h * w; }
  std::size_t plane() const { return h * w; }
  friend bool operator==(const Shape5&, const Shape5&) = default;
};

std::string to_string(const Shape4& s);
std::string to_string(const Shape5& s);

/// Dense batch x channel x height x width array, w fastest.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, Real fill = 0);
  explicit Tensor4(Shape4 shape, Real fill = 0);

  const Shape4& shape() const { return shape_; }
  std::size_t n() const { return shape_.n; }
  std::size_t c() const { return shape_.c; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  Real& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[index(n, c, y, x)];
  }
  Real operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[index(n, c, y, x)];
  }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  std::span<Real> plane(std::size_t n, std::size_t c) {
    return std::span<Real>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }
  std::span<const Real> plane(std::size_t n, std::size_t c) const {
    return std::span<const Real>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }

  void fill(Real v);
  bool all_finite() const;

 private:
  Shape4 shape_;
  std::vector<Real> data_;
};

/// Dense n x c x d x h x w array (cost volumes), w fastest, then h, then d.
class Tensor5 {
 public:
  Tensor5() = default;
  Tensor5(std::size_t n, std::size_t c, std::size_t d, std::size_t h, std::size_t w,
          Real fill = 0);
  explicit Tensor5(Shape5 shape, Real fill = 0);

  const Shape5& shape() const { return shape_; }
  std::size_t n() const { return shape_.n; }
  std::size_t c() const { return shape_.c; }
  std::size_t d() const { return shape_.d; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t n, std::size_t c, std::size_t d, std::size_t y,
                    std::size_t x) const {
    return (((n * shape_.c + c) * shape_.d + d) * shape_.h + y) * shape_.w + x;
  }
  Real& operator()(std::size_t n, std::size_t c, std::size_t d, std::size_t y, std::size_t x) {
    return data_[index(n, c, d, y, x)];
  }
  Real operator()(std::size_t n, std::size_t c, std::size_t d, std::size_t y,
                  std::size_t x) const {
    return data_[index(n, c, d, y, x)];
  }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }

  std::span<Real> plane(std::size_t n, std::size_t c, std::size_t d) {
    return std::span<Real>(data_).subspan(index(n, c, d, 0, 0), shape_.plane());
  }
  std::span<const Real> plane(std::size_t n, std::size_t c, std::size_t d) const {
    return std::span<const Real>(data_).subspan(index(n, c, d, 0, 0), shape_.plane());
  }

  void fill(Real v);
  bool all_finite() const;

 private:
  Shape5 shape_;
  std::vector<Real> data_;
};

/// Reinterprets every (n, d) disparity slice as its own batch entry:
/// (n, c, d, h, w) -> (n*d, c, h, w), entry index n*d + d.
Tensor4 slices_as_batch(const Tensor5& v);
/// Inverse of slices_as_batch.
Tensor5 batch_as_slices(const Tensor4& t, std::size_t d);

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what);

/// A trainable parameter with its gradient accumulator and Adam moments.
struct Param {
  Param() = default;
  Param(std::string name, std::vector<std::size_t> extents, Real fill = 0);

  std::size_t size() const { return value.size(); }
  void zero_grad();

  std::string name;
  std::vector<std::size_t> extents;
  std::vector<Real> value;
  std::vector<Real> grad;
  std::vector<Real> m1;
  std::vector<Real> m2;
  std::uint64_t step_count = 0;
};

}  // namespace dsm
