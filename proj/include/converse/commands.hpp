#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "converse/converse2d.hpp"
#include "converse/image_io.hpp"
#include "converse/kernel_io.hpp"
#include "converse/parallel.hpp"
#include "converse/verify.hpp"
#include "json.hpp"

namespace converse::cli {

enum ExitCode : int { kOk = 0, kPropertyFailure = 1, kUsage = 2, kIo = 3 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound:
    case ErrorCode::MalformedKernel:
    case ErrorCode::UnsupportedImageFormat:
    case ErrorCode::MalformedParameters:
      return kIo;
    default:
      return kUsage;
  }
}

struct DeconvOptions {
  std::filesystem::path input;
  std::filesystem::path kernel;
  std::filesystem::path output;
  std::optional<std::filesystem::path> reference;
  double lambda = 1e-3;
  std::size_t scale = 1;
  std::size_t pad = 0;
  PadMode mode = PadMode::Circular;
};

struct CommandResult {
  Tensor4 output;  // before clamping/quantization
  nlohmann::json report;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

inline double rms(const Tensor4& a, const Tensor4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

inline KernelStack kernel_for(const KernelStack& k, std::size_t channels) {
  if (k.channels() == channels) return k;
  if (k.channels() == 1) return k.broadcast(channels);
  throw Error(ErrorCode::MalformedKernel,
              "kernel file has " + std::to_string(k.channels()) +
                  " channels; expected 1 or " + std::to_string(channels));
}

inline nlohmann::json psnr_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Shared tail of deconv/wiener: PSNR, residuals, output file, JSON report.
inline nlohmann::json finish(const char* command, const DeconvOptions& opt, X0Strategy x0,
                             const ImagePlane& input, const KernelStack& kernel,
                             const Tensor4& out, const ConverseConfig& cfg, double runtime_ms) {
  nlohmann::json psnr_ref = nullptr;
  std::optional<double> value;
  if (opt.reference) {
    const ImagePlane ref = load_image(*opt.reference);
    if (ref.pixels.shape() != out.shape())
      throw Error(ErrorCode::DimensionMismatch, "reference image shape " +
                                                    ref.pixels.shape().str() +
                                                    " differs from output " + out.shape().str());
    value = psnr(out, ref.pixels);
    psnr_ref = "reference";
  } else if (input.pixels.shape() == out.shape()) {
    value = psnr(out, input.pixels);
    psnr_ref = "input";
  }
  save_image(opt.output, ImagePlane{out});

  const Tensor4 reblurred = convolve_downsample(out, kernel, cfg.scale);
  nlohmann::json report;
  report["command"] = command;
  report["input"] = opt.input.string();
  report["kernel"] = opt.kernel.string();
  report["output"] = opt.output.string();
  report["config"] = {{"lambda", opt.lambda},
                      {"scale", cfg.scale},
                      {"pad", cfg.pad_size},
                      {"pad_mode", std::string(to_string(cfg.pad_mode))},
                      {"x0", std::string(to_string(x0))},
                      {"kernel_size", {kernel.kh(), kernel.kw()}}};
  report["shape"] = {{"channels", out.channels()}, {"height", out.height()},
                     {"width", out.width()}};
  report["psnr_db"] = psnr_json(value);
  report["psnr_against"] = psnr_ref;
  report["runtime_ms"] = runtime_ms;
  report["residuals"] = {{"data_rms", rms(reblurred, input.pixels)},
                         {"prior_rms", rms(out, initial_estimate(input.pixels, cfg))}};
  return report;
}

inline void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw Error(ErrorCode::InvalidArgument, "lambda must be a positive finite number");
}

}  // namespace detail

// Non-blind deconvolution of every image channel, X0 = nearest interpolation.
inline CommandResult run_deconv(const DeconvOptions& opt) {
  detail::check_lambda(opt.lambda);
  if (opt.scale == 0) throw Error(ErrorCode::InvalidArgument, "scale must be >= 1");
  const ImagePlane input = load_image(opt.input);
  const KernelStack kernel = detail::kernel_for(load_kernel(opt.kernel), input.channels());
  const ConverseConfig cfg{.scale = opt.scale, .pad_mode = opt.mode, .pad_size = opt.pad,
                           .x0 = X0Strategy::InterpNearest};
  const std::vector<double> lambda(input.channels(), opt.lambda);
  const auto start = std::chrono::steady_clock::now();
  Tensor4 out = converse_solve(input.pixels, kernel, lambda, cfg);
  const double ms = detail::elapsed_ms(start);
  auto report = detail::finish("deconv", opt, cfg.x0, input, kernel, out, cfg, ms);
  return {std::move(out), std::move(report)};
}

// Tikhonov/Wiener inverse filter: scale 1, X0 = 0.
inline CommandResult run_wiener(const DeconvOptions& opt) {
  detail::check_lambda(opt.lambda);
  if (opt.scale != 1) throw Error(ErrorCode::ScaleNotOne, "wiener runs at scale 1 only");
  const ImagePlane input = load_image(opt.input);
  const KernelStack kernel = detail::kernel_for(load_kernel(opt.kernel), input.channels());
  const ConverseConfig cfg{.scale = 1, .pad_mode = opt.mode, .pad_size = opt.pad,
                           .x0 = X0Strategy::Zero};
  const std::vector<double> lambda(input.channels(), opt.lambda);
  const auto start = std::chrono::steady_clock::now();
  Tensor4 out = converse_s1_fast(input.pixels, kernel, lambda, cfg);
  const double ms = detail::elapsed_ms(start);
  auto report = detail::finish("wiener", opt, cfg.x0, input, kernel, out, cfg, ms);
  return {std::move(out), std::move(report)};
}

struct BenchOptions {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 8;
  std::size_t scale = 1;
  std::size_t reps = 5;
  std::uint64_t seed = 1;
};

// Median wall time of converse_solve over `reps` timed runs after one warm-up.
inline nlohmann::json run_bench(const BenchOptions& opt) {
  if (opt.reps < 3) throw Error(ErrorCode::InvalidArgument, "reps must be >= 3");
  if (opt.scale == 0 || opt.height == 0 || opt.width == 0 || opt.channels == 0)
    throw Error(ErrorCode::InvalidArgument, "size, channels and scale must be positive");
  verify::detail::Rng rng(opt.seed);
  const Tensor4 y = verify::detail::random_tensor({1, opt.channels, opt.height, opt.width}, rng);
  const KernelStack k = normalize_kernel(verify::detail::random_bank(opt.channels, 5, rng));
  const auto lambda = lambda_of(LambdaParam::zeros(opt.channels));
  const ConverseConfig cfg{.scale = opt.scale};

  (void)converse_solve(y, k, lambda, cfg);
  std::vector<double> times;
  for (std::size_t r = 0; r < opt.reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    const Tensor4 out = converse_solve(y, k, lambda, cfg);
    times.push_back(detail::elapsed_ms(start));
  }
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  nlohmann::json report;
  report["command"] = "bench";
  report["config"] = {{"height", opt.height},   {"width", opt.width},
                      {"channels", opt.channels}, {"scale", opt.scale},
                      {"reps", opt.reps},       {"pad", cfg.pad_size},
                      {"pad_mode", std::string(to_string(cfg.pad_mode))},
                      {"kernel_size", 5}};
  report["threads"] = thread_count();
  report["runtime_ms"] = median;
  report["min_ms"] = sorted.front();
  report["max_ms"] = sorted.back();
  report["samples_ms"] = times;
  return report;
}

}  // namespace converse::cli
