#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "converse/converse2d.hpp"
#include "converse/tensor.hpp"

namespace converse {

// 1x1 convolution: out[b, :, h, w] = weight * in[b, :, h, w] + bias.
struct ChannelMix {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::vector<double> weight;  // [out, in] row-major
  std::vector<double> bias;    // [out]

  ChannelMix() = default;
  ChannelMix(std::size_t out, std::size_t in)
      : out_channels(out), in_channels(in), weight(out * in, 0.0), bias(out, 0.0) {}

  static ChannelMix identity(std::size_t channels) {
    ChannelMix m(channels, channels);
    for (std::size_t i = 0; i < channels; ++i) m.weight[i * channels + i] = 1.0;
    return m;
  }

  void validate() const {
    if (out_channels == 0 || in_channels == 0 || weight.size() != out_channels * in_channels ||
        bias.size() != out_channels)
      throw Error(ErrorCode::DimensionMismatch, "inconsistent 1x1 convolution parameters");
  }

  Tensor4 operator()(const Tensor4& x) const {
    validate();
    if (x.channels() != in_channels)
      throw Error(ErrorCode::DimensionMismatch,
                  "1x1 convolution expects " + std::to_string(in_channels) + " channels, got " +
                      std::to_string(x.channels()));
    const Shape4 s = x.shape();
    Tensor4 out({s.b, out_channels, s.h, s.w});
    for (std::size_t b = 0; b < s.b; ++b)
      for (std::size_t o = 0; o < out_channels; ++o) {
        auto dst = out.plane(b, o);
        for (double& v : dst) v = bias[o];
        for (std::size_t i = 0; i < in_channels; ++i) {
          const double wgt = weight[o * in_channels + i];
          auto src = x.plane(b, i);
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += wgt * src[k];
        }
      }
    return out;
  }
};

struct LayerNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;

  static LayerNormParams unit(std::size_t channels) {
    return {std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0)};
  }
};

inline constexpr double kLayerNormEps = 1e-6;

// Normalizes across channels at every (b, h, w) position (population variance).
inline Tensor4 layer_norm(const Tensor4& t, std::span<const double> gamma,
                          std::span<const double> beta, double eps = kLayerNormEps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "layer norm eps must be positive");
  const Shape4 s = t.shape();
  if (gamma.size() != s.c || beta.size() != s.c)
    throw Error(ErrorCode::DimensionMismatch, "layer norm parameter size mismatch");
  Tensor4 out(s);
  const double inv_c = 1.0 / static_cast<double>(s.c);
  for (std::size_t b = 0; b < s.b; ++b)
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < s.w; ++j) {
        double mean = 0.0;
        for (std::size_t c = 0; c < s.c; ++c) mean += t(b, c, i, j);
        mean *= inv_c;
        double var = 0.0;
        for (std::size_t c = 0; c < s.c; ++c) {
          const double d = t(b, c, i, j) - mean;
          var += d * d;
        }
        var *= inv_c;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < s.c; ++c)
          out(b, c, i, j) = gamma[c] * (t(b, c, i, j) - mean) * inv_std + beta[c];
      }
  return out;
}

inline Tensor4 layer_norm(const Tensor4& t, const LayerNormParams& p, double eps = kLayerNormEps) {
  return layer_norm(t, p.gamma, p.beta, eps);
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline Tensor4 gelu(Tensor4 t) {
  for (double& v : t.values()) v = gelu(v);
  return t;
}

inline Tensor4 add(Tensor4 a, const Tensor4& b) {
  if (a.shape() != b.shape()) throw Error(ErrorCode::DimensionMismatch, "residual shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.values()[i] += b.values()[i];
  return a;
}

//   x -> LN -> 1x1 -> GELU -> Converse2D -> GELU -> 1x1 -> (+x) = u
//   u -> LN -> 1x1 -> GELU -> 1x1 -> (+u)
struct ConverseBlock {
  LayerNormParams norm1;
  ChannelMix mix1_in;
  KernelBank kernel;
  LambdaParam lambda;
  ConverseConfig config;
  ChannelMix mix1_out;
  LayerNormParams norm2;
  ChannelMix mix2_in;
  ChannelMix mix2_out;

  std::size_t channels() const { return mix1_in.in_channels; }

  void validate() const {
    const std::size_t c = channels();
    mix1_in.validate();
    mix1_out.validate();
    mix2_in.validate();
    mix2_out.validate();
    const bool ok = norm1.gamma.size() == c && norm1.beta.size() == c && norm2.gamma.size() == c &&
                    norm2.beta.size() == c && mix1_in.out_channels == c &&
                    mix1_out.in_channels == c && mix1_out.out_channels == c &&
                    mix2_in.in_channels == c && mix2_out.in_channels == mix2_in.out_channels &&
                    mix2_out.out_channels == c && kernel.raw.channels() == c &&
                    lambda.b.size() == c;
    if (!ok) throw Error(ErrorCode::DimensionMismatch, "inconsistent converse block channels");
    if (config.scale != 1)
      throw Error(ErrorCode::ScaleNotOne, "converse blocks run the operator at scale 1");
  }
};

// First sub-sequence without its residual.
inline Tensor4 block_branch1(const Tensor4& x, const ConverseBlock& blk) {
  Tensor4 h = gelu(blk.mix1_in(layer_norm(x, blk.norm1)));
  h = gelu(converse_solve(h, blk.kernel, blk.lambda, blk.config));
  return blk.mix1_out(h);
}

inline Tensor4 block_branch2(const Tensor4& u, const ConverseBlock& blk) {
  return blk.mix2_out(gelu(blk.mix2_in(layer_norm(u, blk.norm2))));
}

inline Tensor4 block_forward(const Tensor4& x, const ConverseBlock& blk) {
  blk.validate();
  if (x.channels() != blk.channels())
    throw Error(ErrorCode::DimensionMismatch, "block expects " + std::to_string(blk.channels()) +
                                                  " channels, got " +
                                                  std::to_string(x.channels()));
  Tensor4 u = add(x, block_branch1(x, blk));
  Tensor4 branch = block_branch2(u, blk);
  return add(std::move(u), branch);
}

// head (1x1) -> blocks -> tail (1x1)
struct ToyConverseNet {
  ChannelMix head;
  std::vector<ConverseBlock> blocks;
  ChannelMix tail;
};

inline Tensor4 net_forward(const Tensor4& x, const ToyConverseNet& net) {
  if (net.blocks.empty()) throw Error(ErrorCode::InvalidArgument, "network needs >= 1 block");
  Tensor4 h = net.head(x);
  for (const auto& blk : net.blocks) h = block_forward(h, blk);
  return net.tail(h);
}

struct BlockOptions {
  std::size_t channels = 8;
  std::size_t hidden = 0;  // 0 means same as channels
  std::size_t kernel_size = 5;
  ConverseConfig config{};
};

// Default initialization: 1x1 weights uniform in [-1/sqrt(C_in), 1/sqrt(C_in)],
// zero biases, Gaussian(0, 1) raw kernels, b = 0, unit layer norms.
template <typename Rng>
ChannelMix random_mix(std::size_t out, std::size_t in, Rng& rng) {
  ChannelMix m(out, in);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : m.weight) w = dist(rng);
  return m;
}

template <typename Rng>
ConverseBlock random_block(const BlockOptions& opt, Rng& rng) {
  const std::size_t c = opt.channels;
  const std::size_t hidden = opt.hidden == 0 ? c : opt.hidden;
  ConverseBlock blk{
      .norm1 = LayerNormParams::unit(c),
      .mix1_in = random_mix(c, c, rng),
      .kernel = {KernelStack(c, opt.kernel_size, opt.kernel_size)},
      .lambda = LambdaParam::zeros(c),
      .config = opt.config,
      .mix1_out = random_mix(c, c, rng),
      .norm2 = LayerNormParams::unit(c),
      .mix2_in = random_mix(hidden, c, rng),
      .mix2_out = random_mix(c, hidden, rng),
  };
  blk.config.scale = 1;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (double& v : blk.kernel.raw.channel(ch)) v = gauss(rng);
  return blk;
}

template <typename Rng>
ToyConverseNet random_net(std::size_t image_channels, std::size_t num_blocks,
                          const BlockOptions& opt, Rng& rng) {
  ToyConverseNet net;
  net.head = random_mix(opt.channels, image_channels, rng);
  for (std::size_t i = 0; i < num_blocks; ++i) net.blocks.push_back(random_block(opt, rng));
  net.tail = random_mix(image_channels, opt.channels, rng);
  return net;
}

}  // namespace converse
