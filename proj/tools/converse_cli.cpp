// converse: deconvolution, verification and benchmarking front end.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "converse/commands.hpp"

namespace {

using namespace converse;

void add_deconv_flags(CLI::App* cmd, cli::DeconvOptions& opt, std::string& mode) {
  cmd->add_option("-i,--input", opt.input, "Input PGM/PPM image")->required();
  cmd->add_option("-k,--kernel", opt.kernel, "Kernel text file ('C kh kw' header)")->required();
  cmd->add_option("-o,--output", opt.output, "Output image path (PGM/PPM)")->required();
  cmd->add_option("-l,--lambda", opt.lambda, "Regularization weight (> 0)")
      ->capture_default_str();
  cmd->add_option("--pad", opt.pad, "Padding size applied before the solve")
      ->capture_default_str();
  cmd->add_option("--mode", mode, "Padding mode")
      ->check(CLI::IsMember({"zero", "reflect", "replicate", "circular"}))
      ->capture_default_str();
  cmd->add_option("--reference", opt.reference,
                  "Ground-truth image; PSNR is reported against it instead of the input");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-form reverse convolution (Converse2D) toolkit"};
  app.require_subcommand(1);

  cli::DeconvOptions deconv;
  std::string deconv_mode = "circular";
  auto* deconv_cmd = app.add_subcommand(
      "deconv", "Non-blind deconvolution with a known kernel, X0 = nearest interpolation");
  add_deconv_flags(deconv_cmd, deconv, deconv_mode);
  deconv_cmd->add_option("-s,--scale", deconv.scale, "Upscaling factor (>= 1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  cli::DeconvOptions wiener;
  std::string wiener_mode = "circular";
  auto* wiener_cmd =
      app.add_subcommand("wiener", "Tikhonov/Wiener inverse filter baseline (scale 1, X0 = 0)");
  add_deconv_flags(wiener_cmd, wiener, wiener_mode);

  verify::Options vopt;
  bool list_instances = false;
  std::string fault = "none";
  auto* verify_cmd =
      app.add_subcommand("verify", "Run the oracle-equivalence grid and invariant suites");
  verify_cmd->add_option("--seed", vopt.seed, "Random seed")->capture_default_str();
  verify_cmd->add_option("--max-size", vopt.max_size, "Largest plane size in the oracle grid")
      ->check(CLI::Range(3, 32))
      ->capture_default_str();
  verify_cmd->add_flag("--list-instances", list_instances, "Include every instance descriptor");
  verify_cmd
      ->add_option("--inject-fault", fault,
                   "Fault injection for testing the suite itself (none, block-mean)")
      ->check(CLI::IsMember({"none", "block-mean"}))
      ->capture_default_str();

  cli::BenchOptions bopt;
  std::string size = "64x64";
  auto* bench_cmd = app.add_subcommand("bench", "Time the general solve");
  bench_cmd->add_option("--size", size, "Input plane size HxW")->capture_default_str();
  bench_cmd->add_option("-c,--channels", bopt.channels, "Channel count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("-s,--scale", bopt.scale, "Upscaling factor")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--reps", bopt.reps, "Timed repetitions (>= 3)")
      ->check(CLI::Range(3, 100000))
      ->capture_default_str();
  bench_cmd->add_option("--seed", bopt.seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kOk : cli::kUsage;
  }

  try {
    if (*deconv_cmd) {
      deconv.mode = *parse_pad_mode(deconv_mode);
      std::cout << cli::run_deconv(deconv).report.dump(2) << "\n";
    } else if (*wiener_cmd) {
      wiener.mode = *parse_pad_mode(wiener_mode);
      std::cout << cli::run_wiener(wiener).report.dump(2) << "\n";
    } else if (*verify_cmd) {
      if (fault == "block-mean") vopt.fault = verify::Fault::BlockMeanSum;
      const verify::Report report = verify::run(vopt);
      std::cout << report.to_json(list_instances).dump(2) << "\n";
      if (!report.passed()) {
        for (const auto& p : report.properties)
          if (!p.passed())
            std::cerr << "FAILED " << p.name << " (" << p.failures << "/" << p.instances
                      << ")" << (p.failing.empty() ? "" : ": " + p.failing.front()) << "\n";
        return cli::kPropertyFailure;
      }
    } else if (*bench_cmd) {
      const auto x = size.find_first_of("xX");
      try {
        if (x == std::string::npos) throw std::invalid_argument(size);
        bopt.height = std::stoul(size.substr(0, x));
        bopt.width = std::stoul(size.substr(x + 1));
      } catch (const std::exception&) {
        std::cerr << "error: --size must look like HxW, got '" << size << "'\n";
        return cli::kUsage;
      }
      std::cout << cli::run_bench(bopt).dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  }
  return cli::kOk;
}
