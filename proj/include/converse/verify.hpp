#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "converse/converse2d.hpp"
#include "converse/oracle.hpp"
#include "json.hpp"

namespace converse::verify {

enum class Fault { None, BlockMeanSum };

struct Options {
  std::uint64_t seed = 42;
  std::size_t max_size = 6;
  Fault fault = Fault::None;
};

struct PropertyResult {
  std::string name;
  double tolerance = 0.0;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double worst = 0.0;
  std::vector<std::string> failing;  // first few failing instance descriptors

  bool passed() const { return instances > 0 && failures == 0; }
};

struct Report {
  std::uint64_t seed = 0;
  std::size_t max_size = 0;
  std::vector<PropertyResult> properties;
  std::vector<std::string> instances;

  bool passed() const {
    return std::all_of(properties.begin(), properties.end(),
                       [](const PropertyResult& p) { return p.passed(); });
  }
  std::size_t instance_count() const { return instances.size(); }

  // FNV-1a over the instance descriptors.
  std::uint64_t digest() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& s : instances) {
      for (unsigned char ch : s) h = (h ^ ch) * 1099511628211ull;
      h = (h ^ 0xFFu) * 1099511628211ull;
    }
    return h;
  }

  nlohmann::json to_json(bool with_instances = false) const {
    nlohmann::json j;
    j["seed"] = seed;
    j["max_size"] = max_size;
    j["instances_checked"] = instance_count();
    std::ostringstream hex;
    hex << std::hex << digest();
    j["instance_digest"] = hex.str();
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : properties) {
      std::ostringstream worst;
      worst << std::scientific << std::setprecision(3) << p.worst;
      rows.push_back({{"property", p.name},
                      {"instances", p.instances},
                      {"failures", p.failures},
                      {"tolerance", p.tolerance},
                      {"worst", worst.str()},
                      {"status", p.passed() ? "pass" : "fail"},
                      {"failing", p.failing}});
    }
    j["properties"] = rows;
    j["status"] = passed() ? "pass" : "fail";
    if (with_instances) j["instances"] = instances;
    return j;
  }
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform doubles in [lo, hi) from the top 53 bits; independent of the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return state_ = splitmix(state_); }
  double uniform(double lo = -1.0, double hi = 1.0) {
    return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  double gauss() {
    const double u1 = uniform(0.0, 1.0) + 0x1.0p-54;
    const double u2 = uniform(0.0, 1.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

 private:
  std::uint64_t state_;
};

inline Tensor4 random_tensor(Shape4 s, Rng& rng) {
  Tensor4 t(s);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

inline KernelBank random_bank(std::size_t c, std::size_t k, Rng& rng) {
  KernelBank bank{KernelStack(c, k, k)};
  for (std::size_t ch = 0; ch < c; ++ch)
    for (double& v : bank.raw.channel(ch)) v = rng.gauss();
  return bank;
}

// O(N^2) direct DFT of one plane.
inline std::vector<complex> naive_dft(std::span<const double> x, std::size_t h, std::size_t w) {
  std::vector<complex> out(h * w);
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      complex acc{};
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const double ang = -2.0 * std::numbers::pi *
                             (static_cast<double>((u * i) % h) / static_cast<double>(h) +
                              static_cast<double>((v * j) % w) / static_cast<double>(w));
          acc += x[i * w + j] * complex(std::cos(ang), std::sin(ang));
        }
      out[u * w + v] = acc;
    }
  return out;
}

inline Spectrum faulty_block_mean(const Spectrum& s, std::size_t stride) {
  Spectrum m = block_mean(s, stride);
  for (auto& v : m.values()) v *= static_cast<double>(stride * stride);
  return m;
}

class Recorder {
 public:
  Recorder(Report& report, std::string name, double tol) : report_(report) {
    result_.name = std::move(name);
    result_.tolerance = tol;
  }
  ~Recorder() { report_.properties.push_back(std::move(result_)); }
  Recorder(const Recorder&) = delete;
  Recorder& operator=(const Recorder&) = delete;

  // Records one instance whose error must stay below the tolerance.
  void check(const std::string& descriptor, double error) {
    record(descriptor, error, error < result_.tolerance);
  }

  void record(const std::string& descriptor, double error, bool ok) {
    report_.instances.push_back(result_.name + " " + descriptor);
    ++result_.instances;
    if (std::isnan(error) || error > result_.worst) result_.worst = error;
    if (!ok) {
      ++result_.failures;
      if (result_.failing.size() < 5) result_.failing.push_back(descriptor);
    }
  }

  // Runs fn and records a failure (with the error message) if it throws.
  template <typename Fn>
  void guarded(const std::string& descriptor, Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      record(descriptor + " threw: " + e.what(), INFINITY, false);
    }
  }

 private:
  Report& report_;
  PropertyResult result_;
};

inline std::string describe(std::uint64_t seed, std::initializer_list<std::pair<const char*, std::string>> kv) {
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << "=" << v << " ";
  os << "seed=" << seed;
  return os.str();
}

}  // namespace detail

// Oracle-equivalence grid plus the operator, FFT and tensor invariants.
inline Report run(const Options& opt) {
  using namespace detail;
  Report report;
  report.seed = opt.seed;
  report.max_size = opt.max_size;
  converse::detail::SolveHooks hooks;
  if (opt.fault == Fault::BlockMeanSum) hooks.block_mean = &faulty_block_mean;
  std::uint64_t counter = 0;
  auto instance_seed = [&] { return splitmix(opt.seed ^ splitmix(++counter)); };

  // Closed form vs dense normal equations, and minimality of the objective.
  {
    Recorder eq(report, "oracle_equivalence", 1e-8);
    Recorder minimal(report, "minimality", 0.5);
    const std::size_t sizes[] = {3, 4, 6};
    for (std::size_t s : {1u, 2u, 3u})
      for (std::size_t h : sizes)
        for (std::size_t w : sizes) {
          if (h > opt.max_size || w > opt.max_size || h % s != 0 || w % s != 0) continue;
          for (std::size_t c : {1u, 2u})
            for (double b : {-2.0, 0.0, 3.0})
              for (X0Strategy x0 : {X0Strategy::Zero, X0Strategy::InterpNearest}) {
                const std::uint64_t iseed = instance_seed();
                const std::string d = describe(
                    iseed, {{"s", std::to_string(s)},
                            {"h", std::to_string(h)},
                            {"w", std::to_string(w)},
                            {"c", std::to_string(c)},
                            {"b", std::to_string(static_cast<int>(b))},
                            {"x0", std::string(to_string(x0))}});
                eq.guarded(d, [&] {
                  Rng rng(iseed);
                  const Tensor4 y = random_tensor({1, c, h / s, w / s}, rng);
                  const KernelStack k = normalize_kernel(random_bank(c, 3, rng));
                  const std::vector<double> lam = lambda_of({std::vector<double>(c, b)});
                  const ConverseConfig cfg{.scale = s, .pad_mode = PadMode::Circular,
                                           .pad_size = 0, .x0 = x0};
                  const Tensor4 fast = converse_solve(y, k, lam, cfg, hooks);
                  const Tensor4 x0t = initial_estimate(y, cfg);
                  const Tensor4 dense = oracle::solve_planes(y, k, lam, x0t, s);
                  eq.check(d, rel_error(fast, dense, 1e-300));

                  // Largest fraction of perturbations that do not increase the objective.
                  std::size_t not_worse = 0;
                  std::size_t trials = 0;
                  for (std::size_t ch = 0; ch < c; ++ch) {
                    const auto a = oracle::build_forward(k.channel(ch), 3, 3, h, w, s);
                    auto vec = [](std::span<const double> sp) {
                      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
                          sp.data(), static_cast<Eigen::Index>(sp.size())));
                    };
                    const Eigen::VectorXd xs = vec(fast.plane(0, ch));
                    const Eigen::VectorXd yv = vec(y.plane(0, ch));
                    const Eigen::VectorXd x0v = vec(x0t.plane(0, ch));
                    const double base = oracle::objective(a, xs, yv, lam[ch], x0v);
                    for (int t = 0; t < 100; ++t) {
                      Eigen::VectorXd delta(xs.size());
                      for (auto& v : delta) v = rng.gauss();
                      delta *= 1e-3 / delta.norm();
                      ++trials;
                      if (!(oracle::objective(a, xs + delta, yv, lam[ch], x0v) > base)) ++not_worse;
                    }
                  }
                  minimal.record(d, static_cast<double>(not_worse) / static_cast<double>(trials),
                                 not_worse == 0);
                });
              }
        }
  }

  // Scale-1 specialization agrees with the general solve.
  {
    Recorder r(report, "s1_fast_consistency", 1e-10);
    for (int i = 0; i < 50; ++i) {
      const std::uint64_t iseed = instance_seed();
      Rng rng(iseed);
      const Shape4 sh{1 + rng.index(2), 1 + rng.index(4), 4 + rng.index(13), 4 + rng.index(13)};
      const auto mode = static_cast<PadMode>(rng.index(4));
      const std::size_t pad = rng.index(3);
      const X0Strategy x0 = rng.index(2) ? X0Strategy::Zero : X0Strategy::InterpNearest;
      const std::string d = describe(iseed, {{"shape", sh.str()},
                                             {"pad", std::string(to_string(mode)) + ":" +
                                                         std::to_string(pad)},
                                             {"x0", std::string(to_string(x0))}});
      r.guarded(d, [&] {
        const Tensor4 y = random_tensor(sh, rng);
        const KernelStack k = normalize_kernel(random_bank(sh.c, 3, rng));
        std::vector<double> b(sh.c);
        for (double& v : b) v = rng.uniform(-3.0, 3.0);
        const auto lam = lambda_of({b});
        const ConverseConfig cfg{.scale = 1, .pad_mode = mode, .pad_size = pad, .x0 = x0};
        r.check(d, rel_error(converse_s1_fast(y, k, lam, cfg),
                             converse_solve(y, k, lam, cfg, hooks), 1e-300));
      });
    }
  }

  // Closed-form limits.
  {
    Recorder r(report, "analytic_limits", 1e-6);
    for (int i = 0; i < 6; ++i) {
      const std::uint64_t iseed = instance_seed();
      Rng rng(iseed);
      const std::size_t s = 1 + rng.index(3);
      const Shape4 sh{1, 2, 4, 4};
      const Tensor4 y = random_tensor(sh, rng);
      r.guarded(describe(iseed, {{"case", "delta_prior_y"}}), [&] {
        const auto k = KernelStack::delta(2, 3, 3);
        const std::vector<double> lam{0.3, 0.01};
        const ConverseConfig cfg{.scale = 1, .pad_mode = PadMode::Circular, .pad_size = 0,
                                 .x0 = X0Strategy::InterpNearest};
        const double e = rel_error(converse_solve(y, k, lam, cfg, hooks), y);
        r.record(describe(iseed, {{"case", "delta_prior_y"}}), e, e < 1e-12);
      });
      r.guarded(describe(iseed, {{"case", "delta_half"}}), [&] {
        const auto k = KernelStack::delta(2, 3, 3);
        const std::vector<double> lam{1.0, 1.0};
        const ConverseConfig cfg{.scale = 1, .pad_mode = PadMode::Circular, .pad_size = 0,
                                 .x0 = X0Strategy::Zero};
        Tensor4 half = y;
        for (double& v : half.values()) v *= 0.5;
        const double e = rel_error(converse_solve(y, k, lam, cfg, hooks), half);
        r.record(describe(iseed, {{"case", "delta_half"}}), e, e < 1e-12);
      });
      const std::string d = describe(iseed, {{"case", "large_lambda"}, {"s", std::to_string(s)}});
      r.guarded(d, [&] {
        const KernelStack k = normalize_kernel(random_bank(2, 3, rng));
        const std::vector<double> lam{1e8, 1e8};
        const ConverseConfig cfg{.scale = s, .pad_mode = PadMode::Circular, .pad_size = 1,
                                 .x0 = X0Strategy::InterpNearest};
        r.check(d, rel_error(converse_solve(y, k, lam, cfg, hooks), initial_estimate(y, cfg)));
      });
    }
  }

  // Superposition with a zero prior.
  {
    Recorder r(report, "linearity", 1e-10);
    for (int i = 0; i < 10; ++i) {
      const std::uint64_t iseed = instance_seed();
      Rng rng(iseed);
      const std::size_t s = 1 + rng.index(3);
      const Shape4 sh{1, 2, 3 + rng.index(4), 3 + rng.index(4)};
      const std::string d = describe(iseed, {{"shape", sh.str()}, {"s", std::to_string(s)}});
      r.guarded(d, [&] {
        const Tensor4 y1 = random_tensor(sh, rng);
        const Tensor4 y2 = random_tensor(sh, rng);
        const double alpha = rng.uniform(-2.0, 2.0);
        const double beta = rng.uniform(-2.0, 2.0);
        const KernelStack k = normalize_kernel(random_bank(2, 3, rng));
        const auto lam = lambda_of(LambdaParam::zeros(2));
        const ConverseConfig cfg{.scale = s, .pad_mode = PadMode::Circular, .pad_size = 1,
                                 .x0 = X0Strategy::Zero};
        Tensor4 combo(sh);
        for (std::size_t j = 0; j < combo.size(); ++j)
          combo.values()[j] = alpha * y1.values()[j] + beta * y2.values()[j];
        const Tensor4 lhs = converse_solve(combo, k, lam, cfg, hooks);
        const Tensor4 x1 = converse_solve(y1, k, lam, cfg, hooks);
        const Tensor4 x2 = converse_solve(y2, k, lam, cfg, hooks);
        Tensor4 rhs(lhs.shape());
        for (std::size_t j = 0; j < rhs.size(); ++j)
          rhs.values()[j] = alpha * x1.values()[j] + beta * x2.values()[j];
        r.check(d, rel_error(lhs, rhs, 1.0));
      });
    }
  }

  // FFT round trip, Parseval and direct-DFT agreement.
  {
    Recorder round(report, "fft_round_trip", 1e-12);
    Recorder parseval(report, "fft_parseval", 1e-10);
    Recorder naive(report, "fft_naive_dft", 1e-12);
    for (int i = 0; i < 10; ++i) {
      const std::uint64_t iseed = instance_seed();
      Rng rng(iseed);
      const Shape4 sh{1 + rng.index(4), 1 + rng.index(8), 1 + rng.index(16), 1 + rng.index(16)};
      const std::string d = describe(iseed, {{"shape", sh.str()}});
      round.guarded(d, [&] {
        const Tensor4 t = random_tensor(sh, rng);
        const Spectrum f = fft2(t);
        round.check(d, rel_error(ifft2(f), t, 1.0));
        double e_t = 0.0;
        double e_f = 0.0;
        for (double v : t.values()) e_t += v * v;
        for (const complex& v : f.values()) e_f += std::norm(v);
        e_f /= static_cast<double>(sh.plane());
        parseval.check(d, std::abs(e_t - e_f) / e_t);
      });
      const Shape4 small{1, 1, 1 + rng.index(8), 1 + rng.index(8)};
      const std::string dn = describe(iseed, {{"shape", small.str()}});
      naive.guarded(dn, [&] {
        const Tensor4 t = random_tensor(small, rng);
        const Spectrum f = fft2(t);
        const auto ref = naive_dft(t.plane(0), small.h, small.w);
        double err = 0.0;
        double mag = 0.0;
        for (std::size_t j = 0; j < ref.size(); ++j) {
          err = std::max(err, std::abs(f.values()[j] - ref[j]));
          mag = std::max(mag, std::abs(ref[j]));
        }
        naive.check(dn, err / (mag + 1.0));
      });
    }
  }

  // Tensor-layer identities, all exact.
  {
    Recorder r(report, "tensor_identities", 1e-14);
    for (int i = 0; i < 8; ++i) {
      const std::uint64_t iseed = instance_seed();
      Rng rng(iseed);
      const std::size_t p = std::array<std::size_t, 4>{0, 1, 2, 4}[i % 4];
      const Shape4 sh{1, 2, p + 1 + rng.index(5), p + 1 + rng.index(5)};
      const std::size_t s = 1 + rng.index(3);
      const std::string d = describe(iseed, {{"shape", sh.str()}, {"p", std::to_string(p)},
                                             {"s", std::to_string(s)}});
      r.guarded(d, [&] {
        const Tensor4 t = random_tensor(sh, rng);
        bool ok = true;
        for (PadMode m : {PadMode::Zero, PadMode::Reflect, PadMode::Replicate, PadMode::Circular})
          ok = ok && crop(pad(t, m, p), p) == t;
        ok = ok && decimate(upsample_zero(t, s), s) == t;
        Spectrum z(sh);
        for (auto& v : z.values()) v = complex(rng.uniform(), rng.uniform());
        const Spectrum tm = block_mean(tile(z, s), s);
        ok = ok && rel_error(tm, z) < 1e-14;
        r.record(d, ok ? 0.0 : 1.0, ok);
      });
    }
  }

  return report;
}

}  // namespace converse::verify
