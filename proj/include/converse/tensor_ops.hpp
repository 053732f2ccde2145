#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "converse/tensor.hpp"

namespace converse {

enum class PadMode { Zero, Reflect, Replicate, Circular };

constexpr std::string_view to_string(PadMode m) noexcept {
  switch (m) {
    case PadMode::Zero: return "zero";
    case PadMode::Reflect: return "reflect";
    case PadMode::Replicate: return "replicate";
    case PadMode::Circular: return "circular";
  }
  return "?";
}

inline std::optional<PadMode> parse_pad_mode(std::string_view s) {
  if (s == "zero") return PadMode::Zero;
  if (s == "reflect") return PadMode::Reflect;
  if (s == "replicate") return PadMode::Replicate;
  if (s == "circular") return PadMode::Circular;
  return std::nullopt;
}

namespace detail {

// Maps a possibly out-of-range index onto [0, n); nullopt means "zero fill".
inline std::optional<std::size_t> source_index(long i, long n, PadMode mode) {
  if (i >= 0 && i < n) return static_cast<std::size_t>(i);
  switch (mode) {
    case PadMode::Zero:
      return std::nullopt;
    case PadMode::Circular:
      return static_cast<std::size_t>(((i % n) + n) % n);
    case PadMode::Replicate:
      return static_cast<std::size_t>(i < 0 ? 0 : n - 1);
    case PadMode::Reflect:
      return static_cast<std::size_t>(i < 0 ? -i : 2 * (n - 1) - i);
  }
  return std::nullopt;
}

}  // namespace detail

template <typename T>
Array4<T> pad(const Array4<T>& t, PadMode mode, std::size_t p) {
  if (p == 0) return t;
  const Shape4 in = t.shape();
  if (mode == PadMode::Reflect && p >= std::min(in.h, in.w))
    throw Error(ErrorCode::PadTooLarge, "reflect padding " + std::to_string(p) +
                                            " needs input larger than " + in.str());
  Array4<T> out({in.b, in.c, in.h + 2 * p, in.w + 2 * p});
  const long off = static_cast<long>(p);
  for (std::size_t b = 0; b < in.b; ++b)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t i = 0; i < out.height(); ++i) {
        auto si = detail::source_index(static_cast<long>(i) - off, static_cast<long>(in.h), mode);
        if (!si) continue;
        for (std::size_t j = 0; j < out.width(); ++j) {
          auto sj =
              detail::source_index(static_cast<long>(j) - off, static_cast<long>(in.w), mode);
          if (sj) out(b, c, i, j) = t(b, c, *si, *sj);
        }
      }
  return out;
}

template <typename T>
Array4<T> crop(const Array4<T>& t, std::size_t p) {
  if (p == 0) return t;
  const Shape4 in = t.shape();
  if (in.h <= 2 * p || in.w <= 2 * p)
    throw Error(ErrorCode::CropTooLarge,
                "cannot crop " + std::to_string(p) + " from each border of " + in.str());
  Array4<T> out({in.b, in.c, in.h - 2 * p, in.w - 2 * p});
  for (std::size_t b = 0; b < in.b; ++b)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t i = 0; i < out.height(); ++i)
        for (std::size_t j = 0; j < out.width(); ++j) out(b, c, i, j) = t(b, c, i + p, j + p);
  return out;
}

inline void require_scale(std::size_t s) {
  if (s == 0) throw Error(ErrorCode::InvalidShape, "scale factor must be >= 1");
}

// Zero insertion: out[i*s, j*s] = t[i, j], everything else 0.
template <typename T>
Array4<T> upsample_zero(const Array4<T>& t, std::size_t s) {
  require_scale(s);
  if (s == 1) return t;
  const Shape4 in = t.shape();
  Array4<T> out({in.b, in.c, in.h * s, in.w * s});
  for (std::size_t b = 0; b < in.b; ++b)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t i = 0; i < in.h; ++i)
        for (std::size_t j = 0; j < in.w; ++j) out(b, c, i * s, j * s) = t(b, c, i, j);
  return out;
}

// Keeps the upper-left sample of each s x s patch.
template <typename T>
Array4<T> decimate(const Array4<T>& t, std::size_t s) {
  require_scale(s);
  if (s == 1) return t;
  const Shape4 in = t.shape();
  if (in.h % s != 0 || in.w % s != 0)
    throw Error(ErrorCode::IndivisibleShape,
                in.str() + " is not divisible by " + std::to_string(s));
  Array4<T> out({in.b, in.c, in.h / s, in.w / s});
  for (std::size_t b = 0; b < in.b; ++b)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t i = 0; i < out.height(); ++i)
        for (std::size_t j = 0; j < out.width(); ++j) out(b, c, i, j) = t(b, c, i * s, j * s);
  return out;
}

template <typename T>
Array4<T> interp_nearest(const Array4<T>& t, std::size_t s) {
  require_scale(s);
  if (s == 1) return t;
  const Shape4 in = t.shape();
  Array4<T> out({in.b, in.c, in.h * s, in.w * s});
  for (std::size_t b = 0; b < in.b; ++b)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t i = 0; i < out.height(); ++i)
        for (std::size_t j = 0; j < out.width(); ++j) out(b, c, i, j) = t(b, c, i / s, j / s);
  return out;
}

// Mean over the stride^2 distinct sub-blocks of size (H/stride, W/stride).
template <typename T>
Array4<T> block_mean(const Array4<T>& t, std::size_t stride) {
  require_scale(stride);
  const Shape4 in = t.shape();
  if (in.h % stride != 0 || in.w % stride != 0)
    throw Error(ErrorCode::IndivisibleShape,
                in.str() + " is not divisible by " + std::to_string(stride));
  if (stride == 1) return t;
  const std::size_t bh = in.h / stride;
  const std::size_t bw = in.w / stride;
  const double inv = 1.0 / static_cast<double>(stride * stride);
  Array4<T> out({in.b, in.c, bh, bw});
  for (std::size_t b = 0; b < in.b; ++b)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t u = 0; u < bh; ++u)
        for (std::size_t v = 0; v < bw; ++v) {
          T acc{};
          for (std::size_t a = 0; a < stride; ++a)
            for (std::size_t e = 0; e < stride; ++e) acc += t(b, c, u + a * bh, v + e * bw);
          out(b, c, u, v) = acc * inv;
        }
  return out;
}

// Repeats the array stride x stride times along (h, w).
template <typename T>
Array4<T> tile(const Array4<T>& t, std::size_t stride) {
  require_scale(stride);
  if (stride == 1) return t;
  const Shape4 in = t.shape();
  Array4<T> out({in.b, in.c, in.h * stride, in.w * stride});
  for (std::size_t b = 0; b < in.b; ++b)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t i = 0; i < out.height(); ++i)
        for (std::size_t j = 0; j < out.width(); ++j)
          out(b, c, i, j) = t(b, c, i % in.h, j % in.w);
  return out;
}

}  // namespace converse
