// Timing harness for the nodal solver at campaign scale.
#include <chrono>
#include <cstdio>

#include "xbar/circuit.hpp"
#include "xbar/rng.hpp"
#include "xbar/tech.hpp"

int main(int argc, char** argv) {
  int n = argc > 1 ? std::atoi(argv[1]) : 50;
  xbar::CrossbarGeometry geom;
  xbar::TechnologyProfile tech = xbar::technology_by_name("TaOx");
  xbar::Rng rng(12345);

  Eigen::MatrixXd g(geom.rows, geom.cols);
  Eigen::VectorXd v(geom.rows);

  double checksum = 0.0;
  long long sweeps = 0;
  int direct = 0;
  auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < geom.rows; ++i) v[i] = rng.uniform(0.0, geom.v_max);
    for (int i = 0; i < geom.rows; ++i)
      for (int j = 0; j < geom.cols; ++j)
        g(i, j) = 1.0 / rng.uniform(tech.r_on, tech.r_off);
    xbar::SolveStats st;
    auto out = xbar::solve_nonideal(v, g, geom, &st);
    checksum += out.sum();
    sweeps += st.sweeps;
    direct += st.used_direct ? 1 : 0;
  }
  auto t1 = std::chrono::steady_clock::now();
  double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  std::printf("%d solves of %dx%d: %.1f ms total, %.2f ms each, %.1f sweeps avg, %d direct, checksum %.6e\n",
              n, geom.rows, geom.cols, ms, ms / n, double(sweeps) / n, direct, checksum);
  return 0;
}
