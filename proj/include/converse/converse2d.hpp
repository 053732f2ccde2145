#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "converse/fft.hpp"
#include "converse/parallel.hpp"
#include "converse/tensor.hpp"
#include "converse/tensor_ops.hpp"

namespace converse {

// Per-channel spatial kernels [C, kh, kw], kh and kw odd.
class KernelStack {
 public:
  KernelStack(std::size_t channels, std::size_t kh, std::size_t kw, std::vector<double> values)
      : channels_(channels), kh_(kh), kw_(kw), values_(std::move(values)) {
    if (channels_ == 0 || kh_ == 0 || kw_ == 0)
      throw Error(ErrorCode::InvalidKernel, "kernel dimensions must be positive");
    if (kh_ % 2 == 0 || kw_ % 2 == 0)
      throw Error(ErrorCode::InvalidKernel, "kernel dimensions must be odd, got " +
                                                std::to_string(kh_) + "x" + std::to_string(kw_));
    if (values_.size() != channels_ * kh_ * kw_)
      throw Error(ErrorCode::DimensionMismatch, "kernel value count does not match C*kh*kw");
  }

  KernelStack(std::size_t channels, std::size_t kh, std::size_t kw, double fill = 0.0)
      : KernelStack(channels, kh, kw, std::vector<double>(channels * kh * kw, fill)) {}

  std::size_t channels() const noexcept { return channels_; }
  std::size_t kh() const noexcept { return kh_; }
  std::size_t kw() const noexcept { return kw_; }

  double& at(std::size_t c, std::size_t i, std::size_t j) noexcept {
    return values_[(c * kh_ + i) * kw_ + j];
  }
  double at(std::size_t c, std::size_t i, std::size_t j) const noexcept {
    return values_[(c * kh_ + i) * kw_ + j];
  }
  std::span<double> channel(std::size_t c) noexcept {
    return {values_.data() + c * kh_ * kw_, kh_ * kw_};
  }
  std::span<const double> channel(std::size_t c) const noexcept {
    return {values_.data() + c * kh_ * kw_, kh_ * kw_};
  }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  // The same single-channel kernel repeated over `channels`.
  KernelStack broadcast(std::size_t channels) const {
    if (channels_ != 1)
      throw Error(ErrorCode::DimensionMismatch, "only single-channel kernels can be broadcast");
    std::vector<double> v;
    v.reserve(channels * values_.size());
    for (std::size_t c = 0; c < channels; ++c) v.insert(v.end(), values_.begin(), values_.end());
    return {channels, kh_, kw_, std::move(v)};
  }

  static KernelStack delta(std::size_t channels, std::size_t kh, std::size_t kw) {
    KernelStack k(channels, kh, kw);
    for (std::size_t c = 0; c < channels; ++c) k.at(c, kh / 2, kw / 2) = 1.0;
    return k;
  }

  friend bool operator==(const KernelStack&, const KernelStack&) = default;

 private:
  std::size_t channels_;
  std::size_t kh_;
  std::size_t kw_;
  std::vector<double> values_;
};

// Learnable kernel parameters; the kernel actually used is softmax(raw) per channel.
struct KernelBank {
  KernelStack raw;
};

// Per-channel regularization parameters; lambda_c = sigmoid(b_c - 9) + 1e-5.
struct LambdaParam {
  std::vector<double> b;

  static LambdaParam zeros(std::size_t channels) { return {std::vector<double>(channels, 0.0)}; }
};

enum class X0Strategy { Zero, InterpNearest };

constexpr std::string_view to_string(X0Strategy s) noexcept {
  return s == X0Strategy::Zero ? "zero" : "interp_nearest";
}

struct ConverseConfig {
  std::size_t scale = 1;
  PadMode pad_mode = PadMode::Circular;
  std::size_t pad_size = 4;
  X0Strategy x0 = X0Strategy::InterpNearest;
};

inline constexpr double kLambdaShift = 9.0;
inline constexpr double kLambdaEpsilon = 1e-5;

inline KernelStack normalize_kernel(const KernelBank& k) {
  KernelStack out = k.raw;
  for (std::size_t c = 0; c < out.channels(); ++c) {
    auto ch = out.channel(c);
    const double mx = *std::max_element(ch.begin(), ch.end());
    double sum = 0.0;
    for (double& v : ch) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : ch) v /= sum;
  }
  return out;
}

inline std::vector<double> lambda_of(const LambdaParam& p) {
  std::vector<double> out(p.b.size());
  std::transform(p.b.begin(), p.b.end(), out.begin(), [](double b) {
    return 1.0 / (1.0 + std::exp(kLambdaShift - b)) + kLambdaEpsilon;
  });
  return out;
}

// PSF -> OTF: embed each kernel top-left in a target_h x target_w plane, roll
// its center to (0, 0) and transform. Result shape [1, C, target_h, target_w].
inline Spectrum p2o(const KernelStack& k, std::size_t target_h, std::size_t target_w) {
  if (k.kh() > target_h || k.kw() > target_w)
    throw Error(ErrorCode::KernelTooLarge,
                "kernel " + std::to_string(k.kh()) + "x" + std::to_string(k.kw()) +
                    " exceeds target " + std::to_string(target_h) + "x" +
                    std::to_string(target_w));
  Tensor4 plane({1, k.channels(), target_h, target_w});
  const std::size_t ci = k.kh() / 2;
  const std::size_t cj = k.kw() / 2;
  for (std::size_t c = 0; c < k.channels(); ++c)
    for (std::size_t i = 0; i < k.kh(); ++i)
      for (std::size_t j = 0; j < k.kw(); ++j)
        plane(0, c, (i + target_h - ci) % target_h, (j + target_w - cj) % target_w) =
            k.at(c, i, j);
  return fft2(plane);
}

namespace detail {

// Indirection for the spectral block average so the verification suite can
// inject a faulty implementation.
struct SolveHooks {
  Spectrum (*block_mean)(const Spectrum&, std::size_t) = &converse::block_mean<complex>;
};

inline void check_solve_inputs(const Tensor4& y, const KernelStack& k,
                               std::span<const double> lambda, const ConverseConfig& cfg) {
  if (cfg.scale == 0) throw Error(ErrorCode::InvalidArgument, "scale must be >= 1");
  if (k.channels() != y.channels())
    throw Error(ErrorCode::DimensionMismatch,
                "kernel has " + std::to_string(k.channels()) + " channels, input has " +
                    std::to_string(y.channels()));
  if (lambda.size() != y.channels())
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(y.channels()) + " lambda values, got " +
                    std::to_string(lambda.size()));
  for (double l : lambda)
    if (!(l > 0.0) || !std::isfinite(l))
      throw Error(ErrorCode::InvalidArgument, "lambda must be positive and finite");
  if (!y.all_finite()) throw Error(ErrorCode::NonFinite, "input contains NaN or Inf");
}

inline Tensor4 scale_channels(Tensor4 t, std::span<const double> per_channel) {
  for (std::size_t p = 0; p < t.shape().planes(); ++p) {
    const double f = per_channel[p % t.channels()];
    for (double& v : t.plane(p)) v *= f;
  }
  return t;
}

// X0 on the padded input, at the upsampled size.
inline Tensor4 build_x0(const Tensor4& y_padded, const ConverseConfig& cfg) {
  if (cfg.x0 == X0Strategy::Zero) {
    const Shape4 s = y_padded.shape();
    return Tensor4({s.b, s.c, s.h * cfg.scale, s.w * cfg.scale});
  }
  return interp_nearest(y_padded, cfg.scale);
}

inline Tensor4 finish(const Spectrum& out_spectrum, const ConverseConfig& cfg) {
  Tensor4 out = crop(ifft2(out_spectrum), cfg.pad_size * cfg.scale);
  if (!out.all_finite()) throw Error(ErrorCode::NonFinite, "solve produced NaN or Inf");
  return out;
}

}  // namespace detail

// The initial estimate X0 as seen at the output resolution (after cropping).
inline Tensor4 initial_estimate(const Tensor4& y, const ConverseConfig& cfg) {
  return crop(detail::build_x0(pad(y, cfg.pad_mode, cfg.pad_size), cfg),
              cfg.pad_size * cfg.scale);
}

// Closed-form minimizer of ||Y - (X conv K) down_s||^2 + lambda ||X - X0||^2
// under circular boundaries on the padded domain, for known (already
// normalized) kernels and explicit per-channel lambda.
//
//   L    = conj(FK) F(up_s Y) + F(lambda X0)
//   Fdiv = mean_s(FK L) / (mean_s(|FK|^2) + lambda)
//   X*   = F^-1((L - conj(FK) tile_s(Fdiv)) / lambda)
inline Tensor4 converse_solve(const Tensor4& y, const KernelStack& kernel,
                              std::span<const double> lambda, const ConverseConfig& cfg,
                              const detail::SolveHooks& hooks = {}) {
  detail::check_solve_inputs(y, kernel, lambda, cfg);
  const std::size_t s = cfg.scale;
  const std::size_t channels = y.channels();

  const Tensor4 y_padded = pad(y, cfg.pad_mode, cfg.pad_size);
  const Tensor4 x0 = detail::build_x0(y_padded, cfg);
  const Tensor4 y_up = upsample_zero(y_padded, s);
  const Shape4 big = y_up.shape();

  const Spectrum fk = p2o(kernel, big.h, big.w);
  const Spectrum fy = fft2(y_up);
  const Spectrum fx0 = fft2(detail::scale_channels(x0, lambda));

  Spectrum L(big);
  Spectrum fkl(big);
  parallel_for(big.planes(), [&](std::size_t p) {
    auto k = fk.plane(p % channels);
    auto fyp = fy.plane(p);
    auto fxp = fx0.plane(p);
    auto lp = L.plane(p);
    auto out = fkl.plane(p);
    for (std::size_t i = 0; i < lp.size(); ++i) {
      lp[i] = std::conj(k[i]) * fyp[i] + fxp[i];
      out[i] = k[i] * lp[i];
    }
  });
  Spectrum fk2(fk.shape());
  for (std::size_t i = 0; i < fk.size(); ++i) fk2.values()[i] = std::norm(fk.values()[i]);

  Spectrum fdiv = hooks.block_mean(fkl, s);
  const Spectrum fk2_s = hooks.block_mean(fk2, s);
  for (std::size_t p = 0; p < fdiv.shape().planes(); ++p) {
    const std::size_t c = p % channels;
    auto d = fdiv.plane(p);
    auto den = fk2_s.plane(c);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] /= den[i] + lambda[c];
  }
  const Spectrum fdiv_tiled = tile(fdiv, s);

  Spectrum fout(big);
  parallel_for(big.planes(), [&](std::size_t p) {
    const double inv_lambda = 1.0 / lambda[p % channels];
    auto k = fk.plane(p % channels);
    auto lp = L.plane(p);
    auto dp = fdiv_tiled.plane(p);
    auto out = fout.plane(p);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = (lp[i] - std::conj(k[i]) * dp[i]) * inv_lambda;
  });
  return detail::finish(fout, cfg);
}

// Learnable-parameter form: softmax-normalized kernels and sigmoid lambda.
inline Tensor4 converse_solve(const Tensor4& y, const KernelBank& kernel, const LambdaParam& lam,
                              const ConverseConfig& cfg) {
  const std::vector<double> lambda = lambda_of(lam);
  return converse_solve(y, normalize_kernel(kernel), lambda, cfg);
}

// Scale-1 specialization:
//   X* = F^-1((conj(FK) FY + lambda F(X0)) / (|FK|^2 + lambda))
inline Tensor4 converse_s1_fast(const Tensor4& y, const KernelStack& kernel,
                                std::span<const double> lambda, const ConverseConfig& cfg) {
  if (cfg.scale != 1)
    throw Error(ErrorCode::ScaleNotOne,
                "fast path requires scale 1, got " + std::to_string(cfg.scale));
  detail::check_solve_inputs(y, kernel, lambda, cfg);
  const std::size_t channels = y.channels();
  const Tensor4 y_padded = pad(y, cfg.pad_mode, cfg.pad_size);
  const Shape4 sh = y_padded.shape();
  const Spectrum fk = p2o(kernel, sh.h, sh.w);
  const Spectrum fy = fft2(y_padded);
  const bool has_prior = cfg.x0 == X0Strategy::InterpNearest;

  Spectrum fout(sh);
  parallel_for(sh.planes(), [&](std::size_t p) {
    const double lam = lambda[p % channels];
    auto k = fk.plane(p % channels);
    auto fyp = fy.plane(p);
    auto out = fout.plane(p);
    for (std::size_t i = 0; i < out.size(); ++i) {
      // Nearest interpolation at scale 1 is the identity, so F(X0) = FY.
      const complex prior = has_prior ? lam * fyp[i] : complex{};
      out[i] = (std::conj(k[i]) * fyp[i] + prior) / (std::norm(k[i]) + lam);
    }
  });
  return detail::finish(fout, cfg);
}

inline Tensor4 converse_s1_fast(const Tensor4& y, const KernelBank& kernel,
                                const LambdaParam& lam, const ConverseConfig& cfg) {
  const std::vector<double> lambda = lambda_of(lam);
  return converse_s1_fast(y, normalize_kernel(kernel), lambda, cfg);
}

// Circular convolution with the p2o convention (multiplication by FK).
inline Tensor4 circular_convolve(const Tensor4& x, const KernelStack& kernel) {
  if (kernel.channels() != x.channels())
    throw Error(ErrorCode::DimensionMismatch, "kernel/input channel mismatch");
  const Spectrum fk = p2o(kernel, x.height(), x.width());
  Spectrum fx = fft2(x);
  for (std::size_t p = 0; p < fx.shape().planes(); ++p) {
    auto k = fk.plane(p % x.channels());
    auto v = fx.plane(p);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= k[i];
  }
  return ifft2(fx);
}

// Forward degradation (X conv K) down_s under circular boundaries.
inline Tensor4 convolve_downsample(const Tensor4& x, const KernelStack& kernel, std::size_t s) {
  return decimate(circular_convolve(x, kernel), s);
}

}  // namespace converse
