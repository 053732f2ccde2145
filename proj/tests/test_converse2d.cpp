#include <gtest/gtest.h>

#include <random>

#include "converse/converse2d.hpp"
#include "support/test_util.hpp"

using namespace converse;
using converse::testing::direct_dft;
using converse::testing::gaussian_bank;
using converse::testing::random_tensor;

namespace {

Tensor4 scaled(Tensor4 t, double f) {
  for (double& v : t.values()) v *= f;
  return t;
}

ConverseConfig plain(std::size_t s, X0Strategy x0, std::size_t pad = 0) {
  return {.scale = s, .pad_mode = PadMode::Circular, .pad_size = pad, .x0 = x0};
}

}  // namespace

TEST(KernelStack, RejectsEvenSizes) {
  try {
    KernelStack k(1, 4, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidKernel);
  }
}

TEST(NormalizeKernel, UniformForZeroRaw) {
  const KernelStack k = normalize_kernel({KernelStack(2, 5, 5)});
  for (double v : k.values()) EXPECT_NEAR(v, 0.04, 1e-16);
}

TEST(NormalizeKernel, Saturates) {
  KernelBank bank{KernelStack(1, 3, 3)};
  bank.raw.at(0, 1, 2) = 20.0;
  const KernelStack k = normalize_kernel(bank);
  EXPECT_GT(k.at(0, 1, 2), 0.9999);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != 1 || j != 2) {
        EXPECT_LT(k.at(0, i, j), 1e-8);
      }
}

TEST(NormalizeKernel, MatchesDirectSoftmax) {
  std::mt19937_64 rng(1);
  const KernelBank bank = gaussian_bank(3, 3, rng);
  const KernelStack k = normalize_kernel(bank);
  for (std::size_t c = 0; c < 3; ++c) {
    double z = 0.0;
    for (double v : bank.raw.channel(c)) z += std::exp(v);
    double total = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
      EXPECT_NEAR(k.channel(c)[i], std::exp(bank.raw.channel(c)[i]) / z, 1e-14);
      EXPECT_GT(k.channel(c)[i], 0.0);
      total += k.channel(c)[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(LambdaOf, KnownValues) {
  // 1 / (1 + e^9) + 1e-5, evaluated with 30-digit arithmetic.
  constexpr double kAtZero = 1.33394575986231730e-4;
  const auto lam = lambda_of({{0.0, 9.0, 100.0, -50.0}});
  EXPECT_NEAR(lam[0], kAtZero, 1e-18);
  EXPECT_NEAR(lam[1], 0.5 + 1e-5, 1e-15);
  EXPECT_NEAR(lam[2], 1.0 + 1e-5, 1e-12);
  // sigmoid(-59) is below one ulp of 1e-5, so the floor is reached exactly.
  EXPECT_EQ(lam[3], 1e-5);
  EXPECT_LT(lam[2], 1.0 + 1e-5 + 1e-15);
}

TEST(LambdaOf, MonotoneAndBounded) {
  std::vector<double> b;
  for (double v = -40.0; v <= 40.0; v += 0.25) b.push_back(v);
  const auto lam = lambda_of({b});
  for (std::size_t i = 0; i < lam.size(); ++i) {
    EXPECT_GE(lam[i], 1e-5);
    if (b[i] > -20.0) {
      EXPECT_GT(lam[i], 1e-5);
    }
    EXPECT_LT(lam[i], 1.0 + 1e-5 + 1e-15);
    if (i > 0) {
      EXPECT_GE(lam[i], lam[i - 1]);
    }
  }
}

TEST(P2o, DeltaKernelsGiveAllOnes) {
  for (std::size_t k : {1u, 3u, 5u}) {
    const Spectrum s = p2o(KernelStack::delta(2, k, k), 7, 6);
    for (const complex& v : s.values()) EXPECT_LT(std::abs(v - complex(1, 0)), 1e-14);
    EXPECT_EQ(s.shape(), (Shape4{1, 2, 7, 6}));
  }
}

TEST(P2o, UniformKernelMatchesDirectDft) {
  const KernelStack k(1, 3, 3, 1.0 / 9.0);
  const Spectrum s = p2o(k, 6, 6);
  // Rolled embedding built independently: center (1,1) to the origin.
  std::vector<complex> plane(36, 0.0);
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j) plane[((i + 6) % 6) * 6 + (j + 6) % 6] = 1.0 / 9.0;
  const auto ref = direct_dft(plane, 6, 6);
  EXPECT_LT(std::abs(s(0, 0, 0, 0) - complex(1, 0)), 1e-12);
  for (std::size_t i = 0; i < 36; ++i) EXPECT_LT(std::abs(s.values()[i] - ref[i]), 1e-12);
}

TEST(P2o, KernelTooLarge) {
  try {
    (void)p2o(KernelStack(1, 5, 5), 4, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KernelTooLarge);
  }
}

TEST(ConverseSolve, DeltaKernelUnitLambdaHalves) {
  std::mt19937_64 rng(2);
  const Tensor4 y = random_tensor({2, 3, 5, 6}, rng);
  const std::vector<double> lam(3, 1.0);
  const Tensor4 x = converse_solve(y, KernelStack::delta(3, 3, 3), lam, plain(1, X0Strategy::Zero));
  EXPECT_LT(rel_error(x, scaled(y, 0.5)), 1e-12);
}

TEST(ConverseSolve, DeltaKernelWithInputPriorIsIdentity) {
  std::mt19937_64 rng(3);
  const Tensor4 y = random_tensor({1, 2, 6, 4}, rng);
  for (double l : {0.01, 0.1, 1.0, 50.0}) {
    const std::vector<double> lam{l, 2 * l};
    const Tensor4 x =
        converse_solve(y, KernelStack::delta(2, 3, 3), lam, plain(1, X0Strategy::InterpNearest));
    EXPECT_LT(rel_error(x, y), 1e-12) << l;
  }
  // The final (L - conj(FK) Fdiv) / lambda step cancels about log10(1/lambda)
  // digits, so at the lambda floor the identity holds to ~eps / lambda.
  const std::vector<double> floor_lam{1e-5, 1e-5};
  const Tensor4 x = converse_solve(y, KernelStack::delta(2, 3, 3), floor_lam,
                                   plain(1, X0Strategy::InterpNearest));
  EXPECT_LT(rel_error(x, y), 1e-10);
  EXPECT_LT(rel_error(converse_s1_fast(y, KernelStack::delta(2, 3, 3), floor_lam,
                                       plain(1, X0Strategy::InterpNearest)),
                      y),
            1e-14);
}

TEST(ConverseSolve, ShapeContract) {
  std::mt19937_64 rng(4);
  const Tensor4 y = random_tensor({2, 2, 7, 5}, rng);
  const KernelStack k = normalize_kernel(gaussian_bank(2, 3, rng));
  const auto lam = lambda_of(LambdaParam::zeros(2));
  for (PadMode m : {PadMode::Zero, PadMode::Reflect, PadMode::Replicate, PadMode::Circular})
    for (std::size_t p : {0u, 1u, 2u, 4u})
      for (std::size_t s : {1u, 2u, 3u}) {
        const ConverseConfig cfg{.scale = s, .pad_mode = m, .pad_size = p,
                                 .x0 = X0Strategy::InterpNearest};
        const Tensor4 x = converse_solve(y, k, lam, cfg);
        EXPECT_EQ(x.shape(), (Shape4{2, 2, 7 * s, 5 * s})) << to_string(m) << p << s;
        EXPECT_TRUE(x.all_finite());
      }
}

TEST(ConverseSolve, SoftmaxParameterizationEntryPoint) {
  std::mt19937_64 rng(5);
  const Tensor4 y = random_tensor({1, 2, 6, 6}, rng);
  const KernelBank bank = gaussian_bank(2, 5, rng);
  const LambdaParam b{{0.0, 1.5}};
  const ConverseConfig cfg{};
  EXPECT_EQ(converse_solve(y, bank, b, cfg),
            converse_solve(y, normalize_kernel(bank), lambda_of(b), cfg));
}

TEST(ConverseSolve, Linearity) {
  std::mt19937_64 rng(6);
  const KernelStack k = normalize_kernel(gaussian_bank(2, 3, rng));
  const auto lam = lambda_of(LambdaParam::zeros(2));
  for (std::size_t s : {1u, 2u, 3u}) {
    const Tensor4 y1 = random_tensor({1, 2, 5, 4}, rng);
    const Tensor4 y2 = random_tensor({1, 2, 5, 4}, rng);
    Tensor4 combo(y1.shape());
    for (std::size_t i = 0; i < combo.size(); ++i)
      combo.values()[i] = 0.7 * y1.values()[i] - 1.3 * y2.values()[i];
    const auto cfg = plain(s, X0Strategy::Zero, 2);
    const Tensor4 lhs = converse_solve(combo, k, lam, cfg);
    const Tensor4 a = converse_solve(y1, k, lam, cfg);
    const Tensor4 b = converse_solve(y2, k, lam, cfg);
    Tensor4 rhs(lhs.shape());
    for (std::size_t i = 0; i < rhs.size(); ++i)
      rhs.values()[i] = 0.7 * a.values()[i] - 1.3 * b.values()[i];
    EXPECT_LT(rel_error(lhs, rhs, 1.0), 1e-10);
  }
}

TEST(ConverseSolve, HugeLambdaReturnsPrior) {
  std::mt19937_64 rng(7);
  const Tensor4 y = random_tensor({1, 3, 6, 5}, rng);
  const KernelStack k = normalize_kernel(gaussian_bank(3, 5, rng));
  const std::vector<double> lam(3, 1e8);
  for (std::size_t s : {1u, 2u, 3u}) {
    const ConverseConfig cfg{.scale = s, .pad_mode = PadMode::Reflect, .pad_size = 2,
                             .x0 = X0Strategy::InterpNearest};
    const Tensor4 prior = initial_estimate(y, cfg);
    EXPECT_EQ(prior, interp_nearest(y, s));
    EXPECT_LT(rel_error(converse_solve(y, k, lam, cfg), prior), 1e-6);
  }
}

TEST(ConverseSolve, WellConditionedInversion) {
  std::mt19937_64 rng(8);
  KernelStack k(1, 5, 5, 0.1 / 25.0);
  k.at(0, 2, 2) += 0.9;
  const Tensor4 x = random_tensor({1, 1, 32, 32}, rng);
  const Tensor4 y = circular_convolve(x, k);
  const std::vector<double> lam{1e-6};
  const Tensor4 rec = converse_solve(y, k, lam, plain(1, X0Strategy::Zero));
  EXPECT_LT(rel_error(rec, x), 1e-3);
}

TEST(ConverseSolve, InputErrors) {
  std::mt19937_64 rng(9);
  Tensor4 y = random_tensor({1, 2, 4, 4}, rng);
  const KernelStack k = KernelStack::delta(2, 3, 3);
  const std::vector<double> one{0.1};
  EXPECT_THROW((void)converse_solve(y, k, one, plain(1, X0Strategy::Zero)), Error);
  const std::vector<double> neg{0.1, -1.0};
  EXPECT_THROW((void)converse_solve(y, k, neg, plain(1, X0Strategy::Zero)), Error);
  const std::vector<double> ok{0.1, 0.1};
  EXPECT_THROW((void)converse_solve(y, KernelStack::delta(1, 3, 3), ok, plain(1, X0Strategy::Zero)),
               Error);
  y(0, 1, 2, 2) = std::nan("");
  try {
    (void)converse_solve(y, k, ok, plain(1, X0Strategy::Zero));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
  // Kernel larger than the upsampled plane.
  const Tensor4 tiny = random_tensor({1, 2, 1, 1}, rng);
  try {
    (void)converse_solve(tiny, KernelStack::delta(2, 3, 3), ok, plain(2, X0Strategy::Zero));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KernelTooLarge);
  }
}

TEST(ConverseS1Fast, AgreesWithGeneralSolve) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<std::size_t> dim(3, 16);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor4 y = random_tensor({2, 4, dim(rng), dim(rng)}, rng);
    const KernelStack k = normalize_kernel(gaussian_bank(4, 3, rng));
    const auto lam = lambda_of({{-2.0, 0.0, 3.0, 9.0}});
    for (X0Strategy x0 : {X0Strategy::Zero, X0Strategy::InterpNearest}) {
      const auto cfg = plain(1, x0, trial % 3);
      EXPECT_LT(rel_error(converse_s1_fast(y, k, lam, cfg), converse_solve(y, k, lam, cfg)),
                1e-10);
    }
  }
}

TEST(ConverseS1Fast, Limits) {
  std::mt19937_64 rng(11);
  const Tensor4 y = random_tensor({1, 2, 8, 8}, rng);
  const KernelStack k = normalize_kernel(gaussian_bank(2, 3, rng));
  const std::vector<double> huge(2, 1e6);
  EXPECT_LT(max_abs(converse_s1_fast(y, k, huge, plain(1, X0Strategy::Zero))), 1e-4 * max_abs(y));

  const std::vector<double> small(2, 0.01);
  const Tensor4 x = converse_s1_fast(y, KernelStack::delta(2, 3, 3), small, plain(1, X0Strategy::Zero));
  EXPECT_LT(rel_error(x, scaled(y, 1.0 / 1.01)), 1e-12);
}

TEST(ConverseS1Fast, RejectsScaleAboveOne) {
  const std::vector<double> lam{1.0};
  try {
    (void)converse_s1_fast(Tensor4({1, 1, 4, 4}), KernelStack::delta(1, 3, 3), lam,
                           plain(2, X0Strategy::Zero));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ScaleNotOne);
  }
}

// Zero prior at scale 1 is the Tikhonov inverse filter
// conj(FK) FY / (|FK|^2 + lambda), evaluated here with direct DFTs.
TEST(ConverseS1Fast, EqualsDirectTikhonovFilter) {
  std::mt19937_64 rng(12);
  const std::size_t h = 9, w = 7;
  const Tensor4 y = random_tensor({1, 1, h, w}, rng);
  const KernelStack k = normalize_kernel(gaussian_bank(1, 5, rng));
  const double lam = 0.02;

  std::vector<complex> kplane(h * w, 0.0);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      kplane[((i + h - 2) % h) * w + (j + w - 2) % w] = k.at(0, i, j);
  const auto fk = direct_dft(kplane, h, w);
  const auto fy = direct_dft(std::vector<complex>(y.values().begin(), y.values().end()), h, w);
  std::vector<complex> f(h * w);
  for (std::size_t i = 0; i < f.size(); ++i)
    f[i] = std::conj(fk[i]) * fy[i] / (std::norm(fk[i]) + lam);
  const auto ref = direct_dft(f, h, w, +1);

  const std::vector<double> lv{lam};
  const Tensor4 x = converse_s1_fast(y, k, lv, plain(1, X0Strategy::Zero));
  for (std::size_t i = 0; i < ref.size(); ++i)
    EXPECT_NEAR(x.values()[i], ref[i].real() / static_cast<double>(h * w), 1e-12);
}

TEST(ConverseSolve, IndependentOfThreadCount) {
  std::mt19937_64 rng(13);
  const Tensor4 y = random_tensor({2, 6, 10, 12}, rng);
  const KernelStack k = normalize_kernel(gaussian_bank(6, 5, rng));
  const auto lam = lambda_of(LambdaParam::zeros(6));
  const ConverseConfig cfg{.scale = 2};
  setenv("CONVERSE_THREADS", "1", 1);
  const Tensor4 a = converse_solve(y, k, lam, cfg);
  setenv("CONVERSE_THREADS", "3", 1);
  const Tensor4 b = converse_solve(y, k, lam, cfg);
  unsetenv("CONVERSE_THREADS");
  EXPECT_EQ(a, b);
}
