#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "converse/parallel.hpp"
#include "converse/tensor.hpp"

namespace converse {

namespace detail {

// FFTW planning is not thread-safe, execution on new arrays is. Plans are
// created once per (h, w, direction) with FFTW_ESTIMATE, which keeps the
// chosen algorithm (and thus the rounding) fixed across runs.
inline fftw_plan plan_2d(std::size_t h, std::size_t w, int sign) {
  static std::mutex mu;
  static std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> cache;
  std::lock_guard lock(mu);
  auto key = std::make_tuple(h, w, sign);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  std::vector<complex> scratch(h * w);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan p = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf, buf, sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, p);
  return p;
}

inline void transform_planes(Spectrum& s, int sign) {
  fftw_plan p = plan_2d(s.height(), s.width(), sign);
  parallel_for(s.shape().planes(), [&](std::size_t i) {
    auto* buf = reinterpret_cast<fftw_complex*>(s.plane(i).data());
    fftw_execute_dft(p, buf, buf);
  });
}

}  // namespace detail

// Unnormalized forward 2-D DFT over (h, w), per (b, c) plane.
inline Spectrum fft2(const Tensor4& t) {
  Spectrum s(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) s.values()[i] = t.values()[i];
  detail::transform_planes(s, FFTW_FORWARD);
  return s;
}

inline Spectrum fft2(const Spectrum& t) {
  Spectrum s = t;
  detail::transform_planes(s, FFTW_FORWARD);
  return s;
}

// Inverse 2-D DFT with 1/(h*w) scaling, without discarding the imaginary part.
inline Spectrum ifft2_complex(const Spectrum& s) {
  Spectrum out = s;
  detail::transform_planes(out, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(s.shape().plane());
  for (auto& v : out.values()) v *= scale;
  return out;
}

// Inverse DFT returning the real part. Throws RealnessViolation when the
// imaginary residue exceeds 1e-10 * (max |real| + 1).
inline Tensor4 ifft2(const Spectrum& s) {
  Spectrum z = ifft2_complex(s);
  Tensor4 out(s.shape());
  double max_re = 0.0;
  double max_im = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out.values()[i] = z.values()[i].real();
    max_re = std::max(max_re, std::abs(z.values()[i].real()));
    max_im = std::max(max_im, std::abs(z.values()[i].imag()));
  }
  if (!(max_im < 1e-10 * (max_re + 1.0)))
    throw Error(ErrorCode::RealnessViolation,
                "imaginary residue " + std::to_string(max_im) + " against real magnitude " +
                    std::to_string(max_re));
  return out;
}

}  // namespace converse
