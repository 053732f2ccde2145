#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "converse/tensor.hpp"

namespace converse {

// Image as a [1, C, H, W] tensor with C in {1, 3} and values in [0, 1].
struct ImagePlane {
  Tensor4 pixels;

  std::size_t channels() const { return pixels.channels(); }
  std::size_t height() const { return pixels.height(); }
  std::size_t width() const { return pixels.width(); }
};

namespace detail {

class PnmScanner {
 public:
  explicit PnmScanner(std::string bytes) : buf_(std::move(bytes)) {}

  // Next whitespace-delimited header token, skipping '#' comments.
  std::string token() {
    for (;;) {
      while (pos_ < buf_.size() && std::isspace(static_cast<unsigned char>(buf_[pos_]))) ++pos_;
      if (pos_ < buf_.size() && buf_[pos_] == '#') {
        while (pos_ < buf_.size() && buf_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    const std::size_t start = pos_;
    while (pos_ < buf_.size() && !std::isspace(static_cast<unsigned char>(buf_[pos_]))) ++pos_;
    return buf_.substr(start, pos_ - start);
  }

  unsigned long number() {
    const std::string t = token();
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char ch) { return std::isdigit(ch); }))
      throw Error(ErrorCode::UnsupportedImageFormat, "malformed PNM header value '" + t + "'");
    return std::stoul(t);
  }

  // Binary rasters start after exactly one whitespace byte.
  void skip_single_whitespace() { ++pos_; }

  std::size_t remaining() const { return pos_ <= buf_.size() ? buf_.size() - pos_ : 0; }
  unsigned char byte() { return static_cast<unsigned char>(buf_[pos_++]); }

 private:
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Reads binary or ASCII PGM/PPM (P2, P3, P5, P6), 8- or 16-bit.
inline ImagePlane load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::PnmScanner sc(std::move(bytes));

  const std::string magic = sc.token();
  std::size_t channels = 0;
  bool ascii = false;
  if (magic == "P2" || magic == "P5") channels = 1;
  if (magic == "P3" || magic == "P6") channels = 3;
  if (channels == 0)
    throw Error(ErrorCode::UnsupportedImageFormat,
                path.string() + ": expected a PGM/PPM file (P2, P3, P5 or P6)");
  ascii = magic == "P2" || magic == "P3";

  const std::size_t w = sc.number();
  const std::size_t h = sc.number();
  const unsigned long maxval = sc.number();
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535)
    throw Error(ErrorCode::UnsupportedImageFormat, path.string() + ": invalid dimensions");

  ImagePlane img{Tensor4({1, channels, h, w})};
  const double scale = 1.0 / static_cast<double>(maxval);
  const bool wide = maxval > 255;
  if (!ascii) {
    sc.skip_single_whitespace();
    const std::size_t need = w * h * channels * (wide ? 2 : 1);
    if (sc.remaining() < need)
      throw Error(ErrorCode::UnsupportedImageFormat, path.string() + ": truncated raster");
  }
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t c = 0; c < channels; ++c) {
        unsigned long v = 0;
        if (ascii) {
          v = sc.number();
        } else if (wide) {
          v = static_cast<unsigned long>(sc.byte()) << 8;
          v |= sc.byte();
        } else {
          v = sc.byte();
        }
        if (v > maxval)
          throw Error(ErrorCode::UnsupportedImageFormat, path.string() + ": sample above maxval");
        img.pixels(0, c, i, j) = static_cast<double>(v) * scale;
      }
  return img;
}

// Writes binary PGM (1 channel) or PPM (3 channels). Values are clamped to
// [0, 1] and rounded to `maxval` levels (255 or 65535).
inline void save_image(const std::filesystem::path& path, const ImagePlane& img,
                       unsigned maxval = 255) {
  const std::size_t channels = img.channels();
  if ((channels != 1 && channels != 3) || img.pixels.batch() != 1)
    throw Error(ErrorCode::UnsupportedImageFormat, "images must have 1 or 3 channels");
  if (maxval != 255 && maxval != 65535)
    throw Error(ErrorCode::InvalidArgument, "maxval must be 255 or 65535");
  std::string out = (channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n" + std::to_string(maxval) + "\n";
  for (std::size_t i = 0; i < img.height(); ++i)
    for (std::size_t j = 0; j < img.width(); ++j)
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = std::clamp(img.pixels(0, c, i, j), 0.0, 1.0);
        const auto q = static_cast<std::uint32_t>(std::lround(v * maxval));
        if (maxval > 255) out.push_back(static_cast<char>(q >> 8));
        out.push_back(static_cast<char>(q & 0xFFu));
      }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::FileNotFound, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

// 10 log10(1 / MSE) over all channels of [0, 1] images; nullopt when MSE == 0.
inline std::optional<double> psnr(const Tensor4& a, const Tensor4& b) {
  if (a.shape() != b.shape())
    throw Error(ErrorCode::DimensionMismatch, "PSNR needs equal shapes");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  if (!(mse > 0.0)) return std::nullopt;
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace converse
