#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>

#include "converse/error.hpp"
#include "converse/tensor.hpp"

namespace converse::oracle {

// Explicit matrix of X -> (X conv K) down_s on an h x w plane with circular
// boundaries. Rows index the (h/s) x (w/s) output pixels row-major, columns
// the h x w input pixels row-major.
struct DenseOperator {
  Eigen::MatrixXd matrix;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t s = 1;

  std::size_t rows() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(matrix.cols()); }
};

// `kernel` is kh x kw row-major. Output pixel (m, n) (upper-left of its
// s x s patch, i.e. full-grid position (m*s, n*s)) reads
//   sum_{i,j} k[i,j] * X[(m*s - i + kh/2) mod h, (n*s - j + kw/2) mod w],
// which is the spatial form of multiplying by the centered OTF.
inline DenseOperator build_forward(std::span<const double> kernel, std::size_t kh, std::size_t kw,
                                   std::size_t h, std::size_t w, std::size_t s) {
  if (kh == 0 || kw == 0 || kh % 2 == 0 || kw % 2 == 0 || kernel.size() != kh * kw)
    throw Error(ErrorCode::InvalidKernel, "kernel must be odd-sized with kh*kw values");
  if (s == 0 || h % s != 0 || w % s != 0)
    throw Error(ErrorCode::IndivisibleShape, "plane " + std::to_string(h) + "x" +
                                                 std::to_string(w) + " not divisible by " +
                                                 std::to_string(s));
  if (kh > h || kw > w) throw Error(ErrorCode::KernelTooLarge, "kernel larger than plane");

  const std::size_t oh = h / s;
  const std::size_t ow = w / s;
  DenseOperator a{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(oh * ow),
                                        static_cast<Eigen::Index>(h * w)),
                  h, w, s};
  const std::size_t ci = kh / 2;
  const std::size_t cj = kw / 2;
  for (std::size_t m = 0; m < oh; ++m)
    for (std::size_t n = 0; n < ow; ++n) {
      const auto row = static_cast<Eigen::Index>(m * ow + n);
      for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j) {
          const std::size_t r = (m * s + h + ci - i) % h;
          const std::size_t c = (n * s + w + cj - j) % w;
          a.matrix(row, static_cast<Eigen::Index>(r * w + c)) += kernel[i * kw + j];
        }
    }
  return a;
}

namespace detail {
inline void check_dims(const DenseOperator& a, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& x0) {
  if (static_cast<std::size_t>(x.size()) != a.cols() ||
      static_cast<std::size_t>(y.size()) != a.rows() ||
      static_cast<std::size_t>(x0.size()) != a.cols())
    throw Error(ErrorCode::DimensionMismatch, "vector sizes inconsistent with operator");
}
}  // namespace detail

// x* = (A^T A + lambda I)^-1 (A^T y + lambda x0) via Cholesky.
inline Eigen::VectorXd solve_dense(const DenseOperator& a, const Eigen::VectorXd& y, double lambda,
                                   const Eigen::VectorXd& x0) {
  detail::check_dims(a, x0, y, x0);
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  Eigen::MatrixXd normal = a.matrix.transpose() * a.matrix;
  normal.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = a.matrix.transpose() * y + lambda * x0;
  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::InvalidArgument, "normal matrix is not positive definite");
  Eigen::VectorXd x = llt.solve(rhs);
  return x;
}

// ||y - A x||^2 + lambda ||x - x0||^2
inline double objective(const DenseOperator& a, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                        double lambda, const Eigen::VectorXd& x0) {
  detail::check_dims(a, x, y, x0);
  return (y - a.matrix * x).squaredNorm() + lambda * (x - x0).squaredNorm();
}

// Plane-by-plane dense solve of a whole tensor: y is [B, C, h/s, w/s], x0 is
// [B, C, h, w]; kernels exposes channels(), kh(), kw() and channel(c).
template <typename Kernels>
Tensor4 solve_planes(const Tensor4& y, const Kernels& kernels, std::span<const double> lambda,
                     const Tensor4& x0, std::size_t s) {
  const Shape4 xs = x0.shape();
  if (y.batch() != xs.b || y.channels() != xs.c || y.height() * s != xs.h ||
      y.width() * s != xs.w || kernels.channels() != xs.c || lambda.size() != xs.c)
    throw Error(ErrorCode::DimensionMismatch, "inconsistent tensor shapes for dense solve");
  Tensor4 out(xs);
  for (std::size_t c = 0; c < xs.c; ++c) {
    const DenseOperator a = build_forward(kernels.channel(c), kernels.kh(), kernels.kw(), xs.h,
                                          xs.w, s);
    for (std::size_t b = 0; b < xs.b; ++b) {
      auto yp = y.plane(b, c);
      auto xp = x0.plane(b, c);
      const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(
          yp.data(), static_cast<Eigen::Index>(yp.size()));
      const Eigen::VectorXd x0v = Eigen::Map<const Eigen::VectorXd>(
          xp.data(), static_cast<Eigen::Index>(xp.size()));
      const Eigen::VectorXd x = solve_dense(a, yv, lambda[c], x0v);
      auto op = out.plane(b, c);
      for (std::size_t i = 0; i < op.size(); ++i) op[i] = x[static_cast<Eigen::Index>(i)];
    }
  }
  return out;
}

}  // namespace converse::oracle
