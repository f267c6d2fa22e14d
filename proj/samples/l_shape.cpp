// Optimizes a mask for an L-shaped wire and prints the edge distance error
// before and after, plus the optimized mask as ASCII art.

#include <cstdio>

#include "ildls/analysis.hpp"
#include "ildls/ilt.hpp"
#include "ildls/layout.hpp"

int main() {
  using namespace ildls;
  const int n = 96;
  const double pixel = 8.0;

  layout::LayoutSpec spec;
  spec.rects = {{200, 200, 96, 400}, {200, 504, 360, 96}};
  const ScalarField target = layout::rasterize(spec, n, n, pixel);

  lithosim::OpticsParams optics;
  optics.pixel_size = pixel;
  const ilt::KernelsByDefocus kernels{{0.0, lithosim::generate_kernels(optics, 24, 0.0)}};

  ilt::IltConfig cfg;
  const ilt::OptResult r = ilt::optimize(target, kernels, cfg, std::nullopt, [](int it, double loss) {
    if (it % 10 == 0) std::printf("iter %3d  loss %.3f\n", it, loss);
  });

  const lithosim::ResistParams resist{cfg.i_th, cfg.theta_z, 0.0};
  auto printed_ede = [&](const ScalarField& mask) {
    return analysis::ede(lithosim::resist_step(lithosim::aerial_image(mask, kernels.at(0.0)), resist), target, pixel);
  };
  std::printf("EDE target as mask: %.2f nm\n", printed_ede(target));
  std::printf("EDE optimized mask: %.2f nm (best of %d iterations at %d)\n", printed_ede(r.final_mask),
              r.iterations_run, r.best_iteration);

  for (int y = 16; y < 84; y += 2) {
    for (int x = 16; x < 80; ++x) std::putchar(r.final_mask(x, y) ? '#' : (target(x, y) ? '.' : ' '));
    std::putchar('\n');
  }
}
