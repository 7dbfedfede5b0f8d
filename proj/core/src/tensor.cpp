#include "dsm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dsm {

std::string to_string(const Shape4& s) {
  std::ostringstream os;
  os << '[' << s.n << 'x' << s.c << 'x' << s.h << 'x' << s.w << ']';
  return os.str();
}

std::string to_string(const Shape5& s) {
  std::ostringstream os;
  os << '[' << s.n << 'x' << s.c << 'x' << s.d << 'x' << s.h << 'x' << s.w << ']';
  return os.str();
}

Tensor4::Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, Real fill)
    : Tensor4(Shape4{n, c, h, w}, fill) {}

Tensor4::Tensor4(Shape4 shape, Real fill) : shape_(shape), data_(shape.size(), fill) {}

void Tensor4::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor4::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

Tensor5::Tensor5(std::size_t n, std::size_t c, std::size_t d, std::size_t h, std::size_t w,
                 Real fill)
    : Tensor5(Shape5{n, c, d, h, w}, fill) {}

Tensor5::Tensor5(Shape5 shape, Real fill) : shape_(shape), data_(shape.size(), fill) {}

void Tensor5::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor5::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

Tensor4 slices_as_batch(const Tensor5& v) {
  Tensor4 out(v.n() * v.d(), v.c(), v.h(), v.w());
  for (std::size_t n = 0; n < v.n(); ++n)
    for (std::size_t c = 0; c < v.c(); ++c)
      for (std::size_t d = 0; d < v.d(); ++d) {
        auto src = v.plane(n, c, d);
        std::copy(src.begin(), src.end(), out.plane(n * v.d() + d, c).begin());
      }
  return out;
}

Tensor5 batch_as_slices(const Tensor4& t, std::size_t d) {
  if (d == 0 || t.n() % d != 0)
    throw ShapeError("batch_as_slices: batch " + to_string(t.shape()) +
                     " is not a multiple of d=" + std::to_string(d));
  Tensor5 out(t.n() / d, t.c(), d, t.h(), t.w());
  for (std::size_t n = 0; n < out.n(); ++n)
    for (std::size_t c = 0; c < out.c(); ++c)
      for (std::size_t k = 0; k < d; ++k) {
        auto src = t.plane(n * d + k, c);
        std::copy(src.begin(), src.end(), out.plane(n, c, k).begin());
      }
  return out;
}

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

Param::Param(std::string name_, std::vector<std::size_t> extents_, Real fill)
    : name(std::move(name_)), extents(std::move(extents_)) {
  std::size_t count = 1;
  for (auto e : extents) count *= e;
  value.assign(count, fill);
  grad.assign(count, 0);
  m1.assign(count, 0);
  m2.assign(count, 0);
}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0); }

}  // namespace dsm
