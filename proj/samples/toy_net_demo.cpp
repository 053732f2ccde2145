// Builds a small random network of converse blocks, runs it, saves it to
// CVNT1 and checks that the reloaded network gives the same output.
//
//   toy_net_demo [out.cvnt]

#include <cstdio>
#include <exception>
#include <random>

#include "converse/converse.hpp"

int main(int argc, char** argv) {
  using namespace converse;
  try {
    const std::filesystem::path out =
        argc > 1 ? argv[1] : std::filesystem::temp_directory_path() / "toy_net.cvnt";

    std::mt19937_64 rng(7);
    BlockOptions opt;
    opt.channels = 8;
    opt.hidden = 16;
    opt.config.pad_size = 2;
    const ToyConverseNet net = random_net(3, 2, opt, rng);

    Tensor4 x({1, 3, 24, 24});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : x.values()) v = u(rng);

    const Tensor4 y = net_forward(x, net);
    save_net(net, out);
    const Tensor4 y2 = net_forward(x, load_net(out));

    std::printf("forward  [%zu,%zu,%zu,%zu] -> [%zu,%zu,%zu,%zu]\n", x.batch(), x.channels(),
                x.height(), x.width(), y.batch(), y.channels(), y.height(), y.width());
    std::printf("saved    %s (+ .json)\n", out.string().c_str());
    std::printf("reloaded output %s\n", y == y2 ? "identical" : "DIFFERS");
    return y == y2 ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
