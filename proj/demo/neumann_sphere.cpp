// Exterior Neumann problem on the unit sphere: the boundary data come from a
// point charge inside, so the exact exterior solution is known.

#include <cstdio>

#include "gigaqbx/driver.hpp"
#include "gigaqbx/geometry.hpp"

using namespace gigaqbx;

int main() {
  const auto disc = make_sphere(1.0, 1, 8);
  const auto centers = place_qbx_centers(disc, Side::Exterior);
  EvalParams p;
  p.orders = {9, 15};
  p.tree.nmax = 512;

  const Point3 charge{0.1, 0.2, -0.15};
  const auto dn = KernelSpec::laplace(Variant::TargetNormalDeriv);
  std::vector<complex_t> g(disc.num_targets());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = kernel_value(dn, disc.targets[i], disc.target_normals[i], charge, std::nullopt);

  const auto sol = solve_exterior_neumann(disc, centers, p, g);
  std::printf("GMRES: %d iterations, residual %.2e\n", sol.iterations, sol.residual_history.back());

  const std::vector<Point3> probes{{2, 0, 0}, {0, -3, 0}, {1, 1, 1}};
  const auto u = single_layer_off_surface(disc, sol.density_nodes, probes);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto exact = kernel_value(KernelSpec::laplace(), probes[i], std::nullopt, charge, std::nullopt);
    std::printf("(%g, %g, %g): %.10f  exact %.10f\n", probes[i].x, probes[i].y, probes[i].z, u[i].real(),
                exact.real());
  }
}
