#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "converse/error.hpp"

namespace converse {

// (batch, channel, height, width)
struct Shape4 {
  std::size_t b = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  constexpr std::size_t plane() const noexcept { return h * w; }
  constexpr std::size_t planes() const noexcept { return b * c; }
  constexpr std::size_t numel() const noexcept { return b * c * h * w; }
  friend constexpr bool operator==(const Shape4&, const Shape4&) = default;

  std::string str() const {
    std::ostringstream os;
    os << b << "x" << c << "x" << h << "x" << w;
    return os.str();
  }
};

template <typename T>
inline constexpr bool is_complex_v = false;
template <typename T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

// Dense rank-4 array, row-major over (b, c, h, w). All dims are >= 1.
template <typename T>
class Array4 {
 public:
  using value_type = T;

  Array4() : Array4(Shape4{}) {}

  explicit Array4(Shape4 shape, T fill = T{}) : shape_(shape) {
    check_shape(shape_);
    data_.assign(shape_.numel(), fill);
  }

  Array4(Shape4 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_.numel())
      throw Error(ErrorCode::DimensionMismatch,
                  "data size " + std::to_string(data_.size()) + " does not match shape " +
                      shape_.str());
  }

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t batch() const noexcept { return shape_.b; }
  std::size_t channels() const noexcept { return shape_.c; }
  std::size_t height() const noexcept { return shape_.h; }
  std::size_t width() const noexcept { return shape_.w; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t b, std::size_t c, std::size_t i, std::size_t j) noexcept {
    return data_[((b * shape_.c + c) * shape_.h + i) * shape_.w + j];
  }
  const T& operator()(std::size_t b, std::size_t c, std::size_t i, std::size_t j) const noexcept {
    return data_[((b * shape_.c + c) * shape_.h + i) * shape_.w + j];
  }

  // Plane p enumerates (b, c) pairs as b * C + c.
  std::span<T> plane(std::size_t p) noexcept {
    return {data_.data() + p * shape_.plane(), shape_.plane()};
  }
  std::span<const T> plane(std::size_t p) const noexcept {
    return {data_.data() + p * shape_.plane(), shape_.plane()};
  }
  std::span<T> plane(std::size_t b, std::size_t c) noexcept { return plane(b * shape_.c + c); }
  std::span<const T> plane(std::size_t b, std::size_t c) const noexcept {
    return plane(b * shape_.c + c);
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool all_finite() const noexcept {
    for (const T& v : data_) {
      if constexpr (is_complex_v<T>) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
      } else {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  friend bool operator==(const Array4& a, const Array4& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_shape(const Shape4& s) {
    if (s.b == 0 || s.c == 0 || s.h == 0 || s.w == 0)
      throw Error(ErrorCode::InvalidShape, "all dimensions must be >= 1, got " + s.str());
  }

  Shape4 shape_;
  std::vector<T> data_;
};

using complex = std::complex<double>;
using Tensor4 = Array4<double>;
using Spectrum = Array4<complex>;

// Largest absolute value; 0 for an all-zero array.
template <typename T>
double max_abs(const Array4<T>& a) {
  double m = 0.0;
  for (const T& v : a.values()) m = std::max(m, static_cast<double>(std::abs(v)));
  return m;
}

// max |a - b| / (max |b| + floor). Shapes must match.
template <typename T>
double rel_error(const Array4<T>& a, const Array4<T>& b, double floor = 0.0) {
  if (a.shape() != b.shape())
    throw Error(ErrorCode::DimensionMismatch,
                "shape " + a.shape().str() + " vs " + b.shape().str());
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    num = std::max(num, static_cast<double>(std::abs(a.values()[i] - b.values()[i])));
  const double den = max_abs(b) + floor;
  return den > 0.0 ? num / den : num;
}

}  // namespace converse
