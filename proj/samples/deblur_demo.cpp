// Blurs an image with a Gaussian PSF, then restores it with the closed-form
// solver and prints the PSNR before and after.
//
//   deblur_demo [image.pgm|ppm] [lambda]

#include <cstdio>
#include <cstdlib>
#include <exception>

#include "converse/converse.hpp"

int main(int argc, char** argv) {
  using namespace converse;
  try {
    const char* path = argc > 1 ? argv[1] : CONVERSE_SAMPLE_IMAGE;
    const double lambda = argc > 2 ? std::atof(argv[2]) : 1e-4;

    const ImagePlane sharp = load_image(path);
    const std::size_t c = sharp.pixels.channels();
    const KernelStack psf = gaussian_kernel(7, 1.5, c);
    const Tensor4 blurred = circular_convolve(sharp.pixels, psf);

    const ConverseConfig cfg{.scale = 1, .pad_mode = PadMode::Circular, .pad_size = 0,
                             .x0 = X0Strategy::InterpNearest};
    const Tensor4 restored = converse_solve(blurred, psf, std::vector<double>(c, lambda), cfg);

    std::printf("image    %zux%zu, %zu channel(s)\n", sharp.pixels.height(), sharp.pixels.width(), c);
    std::printf("blurred  %.2f dB\n", psnr(blurred, sharp.pixels).value_or(INFINITY));
    std::printf("restored %.2f dB (lambda %g)\n", psnr(restored, sharp.pixels).value_or(INFINITY),
                lambda);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
