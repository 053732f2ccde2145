#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <fstream>
#include <string>
#include <vector>

#include "converse/blocks.hpp"
#include "json.hpp"

namespace converse {

// CVNT1 network container. See docs/cvnt1.md for the byte layout.
namespace cvnt1 {

inline constexpr std::array<char, 5> kMagic{'C', 'V', 'N', 'T', '1'};
inline constexpr std::size_t kHeaderFields = 10;

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> values;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f64(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  void magic() {
    need(kMagic.size());
    if (std::memcmp(buf_.data(), kMagic.data(), kMagic.size()) != 0)
      throw Error(ErrorCode::MalformedParameters, "missing CVNT1 magic");
    pos_ += kMagic.size();
  }

  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size())
      throw Error(ErrorCode::MalformedParameters, "truncated CVNT1 container");
  }

  const std::string& buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

struct Header {
  std::uint32_t image_channels;
  std::uint32_t channels;
  std::uint32_t hidden;
  std::uint32_t num_blocks;
  std::uint32_t kh;
  std::uint32_t kw;
  std::uint32_t pad_mode;
  std::uint32_t pad_size;
  std::uint32_t x0;
  std::uint32_t scale;
};

// Parameter tensors in declaration order.
inline std::vector<NamedTensor> parameter_table(ToyConverseNet& net) {
  std::vector<NamedTensor> t;
  auto mix = [&t](const std::string& name, ChannelMix& m) {
    t.push_back({name + ".weight", {m.out_channels, m.in_channels}, m.weight});
    t.push_back({name + ".bias", {m.out_channels}, m.bias});
  };
  mix("head", net.head);
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    auto& b = net.blocks[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    const std::size_t c = b.channels();
    t.push_back({p + "norm1.gamma", {c}, b.norm1.gamma});
    t.push_back({p + "norm1.beta", {c}, b.norm1.beta});
    mix(p + "mix1_in", b.mix1_in);
    t.push_back({p + "kernel.raw", {c, b.kernel.raw.kh(), b.kernel.raw.kw()},
                 b.kernel.raw.values()});
    t.push_back({p + "lambda.b", {c}, b.lambda.b});
    mix(p + "mix1_out", b.mix1_out);
    t.push_back({p + "norm2.gamma", {c}, b.norm2.gamma});
    t.push_back({p + "norm2.beta", {c}, b.norm2.beta});
    mix(p + "mix2_in", b.mix2_in);
    mix(p + "mix2_out", b.mix2_out);
  }
  mix("tail", net.tail);
  return t;
}

inline Header header_of(const ToyConverseNet& net) {
  if (net.blocks.empty()) throw Error(ErrorCode::InvalidArgument, "network needs >= 1 block");
  const auto& b0 = net.blocks.front();
  for (const auto& b : net.blocks) {
    b.validate();
    if (b.channels() != b0.channels() || b.mix2_in.out_channels != b0.mix2_in.out_channels ||
        b.kernel.raw.kh() != b0.kernel.raw.kh() || b.kernel.raw.kw() != b0.kernel.raw.kw() ||
        b.config.pad_mode != b0.config.pad_mode || b.config.pad_size != b0.config.pad_size ||
        b.config.x0 != b0.config.x0)
      throw Error(ErrorCode::InvalidArgument, "CVNT1 requires uniform block hyperparameters");
  }
  return {static_cast<std::uint32_t>(net.head.in_channels),
          static_cast<std::uint32_t>(b0.channels()),
          static_cast<std::uint32_t>(b0.mix2_in.out_channels),
          static_cast<std::uint32_t>(net.blocks.size()),
          static_cast<std::uint32_t>(b0.kernel.raw.kh()),
          static_cast<std::uint32_t>(b0.kernel.raw.kw()),
          static_cast<std::uint32_t>(b0.config.pad_mode),
          static_cast<std::uint32_t>(b0.config.pad_size),
          static_cast<std::uint32_t>(b0.config.x0),
          static_cast<std::uint32_t>(b0.config.scale)};
}

inline std::vector<std::uint32_t> header_fields(const Header& h) {
  return {h.image_channels, h.channels, h.hidden, h.num_blocks, h.kh,
          h.kw,             h.pad_mode, h.pad_size, h.x0,       h.scale};
}

inline std::string encode(ToyConverseNet net) {
  const Header h = header_of(net);
  auto table = parameter_table(net);
  std::string out(kMagic.begin(), kMagic.end());
  for (auto f : header_fields(h)) detail::put_u32(out, f);
  detail::put_u32(out, static_cast<std::uint32_t>(table.size()));
  for (const auto& t : table) detail::put_u32(out, static_cast<std::uint32_t>(t.values.size()));
  for (const auto& t : table)
    for (double d : t.values) detail::put_f64(out, d);
  return out;
}

inline ToyConverseNet decode(const std::string& bytes) {
  detail::Reader r(bytes);
  r.magic();
  Header h{};
  h.image_channels = r.u32();
  h.channels = r.u32();
  h.hidden = r.u32();
  h.num_blocks = r.u32();
  h.kh = r.u32();
  h.kw = r.u32();
  h.pad_mode = r.u32();
  h.pad_size = r.u32();
  h.x0 = r.u32();
  h.scale = r.u32();
  if (h.num_blocks == 0 || h.channels == 0 || h.image_channels == 0 || h.hidden == 0 ||
      h.pad_mode > 3 || h.x0 > 1 || h.scale != 1 || h.kh % 2 == 0 || h.kw % 2 == 0)
    throw Error(ErrorCode::MalformedParameters, "invalid CVNT1 header");

  ToyConverseNet net;
  net.head = ChannelMix(h.channels, h.image_channels);
  net.tail = ChannelMix(h.image_channels, h.channels);
  for (std::uint32_t i = 0; i < h.num_blocks; ++i) {
    net.blocks.push_back(ConverseBlock{
        .norm1 = LayerNormParams::unit(h.channels),
        .mix1_in = ChannelMix(h.channels, h.channels),
        .kernel = {KernelStack(h.channels, h.kh, h.kw)},
        .lambda = LambdaParam::zeros(h.channels),
        .config = {.scale = 1,
                   .pad_mode = static_cast<PadMode>(h.pad_mode),
                   .pad_size = h.pad_size,
                   .x0 = static_cast<X0Strategy>(h.x0)},
        .mix1_out = ChannelMix(h.channels, h.channels),
        .norm2 = LayerNormParams::unit(h.channels),
        .mix2_in = ChannelMix(h.hidden, h.channels),
        .mix2_out = ChannelMix(h.channels, h.hidden),
    });
  }
  auto table = parameter_table(net);
  if (r.u32() != table.size())
    throw Error(ErrorCode::MalformedParameters, "tensor count does not match header");
  for (const auto& t : table)
    if (r.u32() != t.values.size())
      throw Error(ErrorCode::MalformedParameters, "size mismatch for tensor " + t.name);
  for (auto& t : table)
    for (double& d : t.values) d = r.f64();
  if (!r.at_end()) throw Error(ErrorCode::MalformedParameters, "trailing bytes after payload");
  return net;
}

inline nlohmann::json sidecar(ToyConverseNet net) {
  const Header h = header_of(net);
  nlohmann::json j;
  j["format"] = "CVNT1";
  j["byte_order"] = "little";
  j["image_channels"] = h.image_channels;
  j["channels"] = h.channels;
  j["hidden"] = h.hidden;
  j["num_blocks"] = h.num_blocks;
  j["kernel_size"] = {h.kh, h.kw};
  j["pad_mode"] = std::string(to_string(static_cast<PadMode>(h.pad_mode)));
  j["pad_size"] = h.pad_size;
  j["x0"] = std::string(to_string(static_cast<X0Strategy>(h.x0)));
  j["scale"] = h.scale;
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : parameter_table(net)) {
    std::size_t n = 1;
    for (auto d : t.shape) n *= d;
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", n}});
    offset += n;
  }
  j["tensors"] = tensors;
  return j;
}

}  // namespace cvnt1

// Writes `path` (binary) and `path` + ".json" (shape sidecar).
inline void save_net(const ToyConverseNet& net, const std::filesystem::path& path) {
  const std::string bytes = cvnt1::encode(net);
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw Error(ErrorCode::FileNotFound, "cannot write " + path.string());
  bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  std::ofstream side(path.string() + ".json");
  if (!side) throw Error(ErrorCode::FileNotFound, "cannot write sidecar for " + path.string());
  side << cvnt1::sidecar(net).dump(2) << "\n";
}

inline ToyConverseNet load_net(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return cvnt1::decode(bytes);
}

}  // namespace converse
