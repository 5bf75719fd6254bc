// Evaluates the single-layer potential of a smooth density on the sphere
// with both expansion modes, then compares the modeled cost of each.

#include <cstdio>

#include "gigaqbx/costmodel.hpp"
#include "gigaqbx/driver.hpp"
#include "gigaqbx/geometry.hpp"

using namespace gigaqbx;

int main() {
  const auto disc = make_sphere(1.0, 1, 6);
  const auto centers = place_qbx_centers(disc, Side::Exterior);
  std::vector<complex_t> density(disc.num_nodes());
  for (std::size_t i = 0; i < density.size(); ++i) density[i] = 1.0 + disc.nodes[i].z;

  const auto constants = CalibrationConstants::reference();
  for (auto mode : {EvalMode::Baseline, EvalMode::TargetSpecific}) {
    EvalParams p;
    p.orders = {5, 15};
    p.tree.nmax = 128;
    p.mode = mode;
    const auto r = evaluate(disc, centers, density, {}, p);
    const auto model = modeled_time(r.counts, p.orders, constants);
    double measured = 0.0;
    for (const auto& [stage, t] : r.stage_timings) measured += t;
    std::printf("%-15s u(target 0) = %.12f  modeled %.3f s  measured %.3f s\n", mode_name(mode),
                r.qbx_values[0].real(), model.total, measured);
  }
}
