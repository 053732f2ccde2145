#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "converse/commands.hpp"
#include "support/cli_runner.hpp"
#include "support/test_util.hpp"

using namespace converse;
using converse::testing::run_cli;
using converse::testing::schema_of;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CONVERSE_DATA_DIR;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "converse_cmd_test";
  fs::create_directories(dir);
  return dir / name;
}

nlohmann::json golden(const std::string& name) {
  std::ifstream in(fs::path(CONVERSE_GOLDEN_DIR) / name);
  return nlohmann::json::parse(in);
}

// Circularly blurs the bundled image and stores it with 16-bit precision.
fs::path blurred_test_image(const KernelStack& k) {
  const ImagePlane sharp = load_image(kData / "test64.pgm");
  const auto path = scratch("blurred64.pgm");
  save_image(path, ImagePlane{circular_convolve(sharp.pixels, k)}, 65535);
  return path;
}

cli::DeconvOptions opts(fs::path input, fs::path kernel, double lambda, const std::string& out) {
  cli::DeconvOptions o;
  o.input = std::move(input);
  o.kernel = std::move(kernel);
  o.lambda = lambda;
  o.output = scratch(out);
  return o;
}

}  // namespace

TEST(Deconv, DeltaKernelIsNearIdentity) {
  const auto r = cli::run_deconv(opts(kData / "test64.pgm", kData / "delta3.txt", 1e-3, "d.pgm"));
  ASSERT_TRUE(r.report["psnr_db"].is_number());
  EXPECT_GT(r.report["psnr_db"].get<double>(), 60.0);
  EXPECT_EQ(r.report["psnr_against"], "input");
}

TEST(Deconv, BlurRoundTripImprovesPsnr) {
  const KernelStack k = load_kernel(kData / "gauss7.txt");
  const auto blurred = blurred_test_image(k);
  const ImagePlane sharp = load_image(kData / "test64.pgm");
  const double blurred_psnr = *psnr(load_image(blurred).pixels, sharp.pixels);
  auto o = opts(blurred, kData / "gauss7.txt", 1e-4, "deblurred.pgm");
  o.reference = kData / "test64.pgm";
  const auto r = cli::run_deconv(o);
  EXPECT_EQ(r.report["psnr_against"], "reference");
  EXPECT_GE(r.report["psnr_db"].get<double>(), blurred_psnr + 5.0)
      << "blurred " << blurred_psnr;
}

TEST(Deconv, ScaleTwoDoublesSize) {
  auto o = opts(kData / "test64.pgm", kData / "gauss7.txt", 1e-2, "up.pgm");
  o.scale = 2;
  const auto r = cli::run_deconv(o);
  EXPECT_EQ(r.output.shape(), (Shape4{1, 1, 128, 128}));
  EXPECT_EQ(load_image(o.output).pixels.shape(), (Shape4{1, 1, 128, 128}));
  EXPECT_TRUE(r.report["psnr_db"].is_null());
}

TEST(Deconv, MatchesLibrarySolve) {
  auto o = opts(kData / "test64.ppm", kData / "gauss7.txt", 3e-3, "lib.ppm");
  o.pad = 4;
  o.mode = PadMode::Reflect;
  const auto r = cli::run_deconv(o);
  const ImagePlane in = load_image(o.input);
  const std::vector<double> lam(3, 3e-3);
  const ConverseConfig cfg{.scale = 1, .pad_mode = PadMode::Reflect, .pad_size = 4,
                           .x0 = X0Strategy::InterpNearest};
  EXPECT_EQ(r.output, converse_solve(in.pixels, load_kernel(o.kernel).broadcast(3), lam, cfg));
}

TEST(Deconv, ReportSchemaMatchesGolden) {
  auto o = opts(kData / "test64.pgm", kData / "gauss7.txt", 1e-2, "schema.pgm");
  EXPECT_EQ(schema_of(cli::run_deconv(o).report), golden("deconv_report_schema.json"));
  EXPECT_EQ(schema_of(cli::run_wiener(o).report), golden("deconv_report_schema.json"));
}

TEST(Deconv, Errors) {
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code([] { cli::run_deconv(opts("/nonexistent.pgm", kData / "delta3.txt", 1, "x")); }),
            ErrorCode::FileNotFound);
  const auto bad = scratch("bad_kernel.txt");
  std::ofstream(bad) << "1 3 3\n1 2 3\n";
  EXPECT_EQ(code([&] { cli::run_deconv(opts(kData / "test64.pgm", bad, 1, "x.pgm")); }),
            ErrorCode::MalformedKernel);
  const auto two = scratch("two_kernel.txt");
  std::ofstream(two) << "2 1 1\n1\n1\n";
  EXPECT_EQ(code([&] { cli::run_deconv(opts(kData / "test64.ppm", two, 1, "x.ppm")); }),
            ErrorCode::MalformedKernel);
  const auto txt = scratch("not_image.txt");
  std::ofstream(txt) << "hello";
  EXPECT_EQ(code([&] { cli::run_deconv(opts(txt, kData / "delta3.txt", 1, "x.pgm")); }),
            ErrorCode::UnsupportedImageFormat);
  EXPECT_EQ(code([] { cli::run_deconv(opts(kData / "test64.pgm", kData / "delta3.txt", 0, "x")); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::MalformedKernel), cli::kIo);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::InvalidArgument), cli::kUsage);
}

TEST(Wiener, EqualsZeroPriorSolve) {
  const auto o = opts(kData / "test64.ppm", kData / "gauss7.txt", 1e-3, "w.ppm");
  const auto r = cli::run_wiener(o);
  const ImagePlane in = load_image(o.input);
  const std::vector<double> lam(3, 1e-3);
  const ConverseConfig cfg{.scale = 1, .pad_mode = PadMode::Circular, .pad_size = 0,
                           .x0 = X0Strategy::Zero};
  const Tensor4 ref = converse_solve(in.pixels, load_kernel(o.kernel).broadcast(3), lam, cfg);
  EXPECT_LT(rel_error(r.output, ref, 1.0), 1e-10);
  EXPECT_EQ(r.report["config"]["x0"], "zero");
}

TEST(Wiener, DeltaUnitLambdaHalves) {
  const auto r = cli::run_wiener(opts(kData / "test64.pgm", kData / "delta3.txt", 1.0, "h.pgm"));
  const ImagePlane in = load_image(kData / "test64.pgm");
  for (std::size_t i = 0; i < in.pixels.size(); ++i)
    EXPECT_NEAR(r.output.values()[i], 0.5 * in.pixels.values()[i], 1e-12);
}

// PSNR over a lambda sweep has at most one interior maximum.
TEST(Wiener, LambdaSweepIsUnimodal) {
  const KernelStack k = load_kernel(kData / "gauss7.txt");
  const auto blurred = blurred_test_image(k);
  std::vector<double> values;
  for (double lam : {1e-4, 1e-2, 1.0}) {
    auto o = opts(blurred, kData / "gauss7.txt", lam, "sweep.pgm");
    o.reference = kData / "test64.pgm";
    values.push_back(cli::run_wiener(o).report["psnr_db"].get<double>());
  }
  std::size_t direction_changes = 0;
  for (std::size_t i = 2; i < values.size(); ++i)
    if ((values[i] - values[i - 1]) * (values[i - 1] - values[i - 2]) < 0) ++direction_changes;
  EXPECT_LE(direction_changes, 1u);
  // A peak, never a valley.
  if (direction_changes == 1) {
    EXPECT_GT(values[1], values[0]);
  }
}

TEST(Bench, ReportsPositiveMedian) {
  const auto r = cli::run_bench({.height = 64, .width = 64, .channels = 8, .scale = 1, .reps = 5});
  EXPECT_GT(r["runtime_ms"].get<double>(), 0.0);
  EXPECT_EQ(r["samples_ms"].size(), 5u);
  EXPECT_EQ(schema_of(r), golden("bench_report_schema.json"));
  EXPECT_THROW((void)cli::run_bench({.reps = 2}), Error);
}

TEST(Bench, ScalingSanity) {
  const auto small = cli::run_bench({.height = 64, .width = 64, .channels = 4, .reps = 5});
  const auto large = cli::run_bench({.height = 128, .width = 128, .channels = 4, .reps = 5});
  const auto up = cli::run_bench({.height = 64, .width = 64, .channels = 4, .scale = 2, .reps = 5});
  const double ratio = large["runtime_ms"].get<double>() / small["runtime_ms"].get<double>();
  RecordProperty("ratio_128_vs_64", std::to_string(ratio));
  RecordProperty("ratio_s2_vs_s1", std::to_string(up["runtime_ms"].get<double>() /
                                                  small["runtime_ms"].get<double>()));
  // Loose: timing noise on shared machines.
  EXPECT_LT(ratio, 16.0);
}

TEST(Verify, SeedFortyTwoPasses) {
  const auto report = verify::run({.seed = 42, .max_size = 6});
  EXPECT_TRUE(report.passed()) << report.to_json().dump(2);
  EXPECT_GE(report.instance_count(), 200u);
  EXPECT_EQ(schema_of(report.to_json()), golden("verify_report_schema.json"));
}

TEST(Verify, SameSeedSameInstances) {
  const auto a = verify::run({.seed = 7, .max_size = 4});
  const auto b = verify::run({.seed = 7, .max_size = 4});
  EXPECT_EQ(a.instances, b.instances);
  EXPECT_EQ(a.to_json(), b.to_json());
  const auto c = verify::run({.seed = 8, .max_size = 4});
  EXPECT_NE(a.digest(), c.digest());
}

TEST(Verify, InjectedBlockMeanFaultIsCaught) {
  const auto report = verify::run({.seed = 42, .max_size = 6, .fault = verify::Fault::BlockMeanSum});
  EXPECT_FALSE(report.passed());
  bool named = false;
  for (const auto& p : report.properties)
    if (p.name == "oracle_equivalence") {
      named = !p.passed() && !p.failing.empty() && p.failing.front().find("seed=") != std::string::npos;
    }
  EXPECT_TRUE(named);
}

TEST(CliBinary, ExitCodes) {
  EXPECT_EQ(run_cli("--help").exit_code, 0);
  EXPECT_EQ(run_cli("").exit_code, cli::kUsage);
  EXPECT_EQ(run_cli("deconv -i x.pgm").exit_code, cli::kUsage);
  EXPECT_EQ(run_cli("bench --size 12by4").exit_code, cli::kUsage);
  const auto missing = run_cli("deconv -i /nonexistent.pgm -k " + (kData / "delta3.txt").string() +
                               " -o " + scratch("m.pgm").string());
  EXPECT_EQ(missing.exit_code, cli::kIo);
  EXPECT_NE(missing.err.find("FileNotFound"), std::string::npos);
  EXPECT_EQ(std::count(missing.err.begin(), missing.err.end(), '\n'), 1);
  const auto fault = run_cli("verify --seed 42 --inject-fault block-mean");
  EXPECT_EQ(fault.exit_code, cli::kPropertyFailure);
  EXPECT_NE(fault.err.find("oracle_equivalence"), std::string::npos);
}

TEST(CliBinary, DeconvEmitsJson) {
  const auto r = run_cli("deconv -i " + (kData / "test64.pgm").string() + " -k " +
                         (kData / "gauss7.txt").string() + " -o " + scratch("c.pgm").string() +
                         " --lambda 0.01 --pad 2 --mode replicate");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["config"]["pad_mode"], "replicate");
  EXPECT_EQ(schema_of(j), golden("deconv_report_schema.json"));
}
