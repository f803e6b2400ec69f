#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "xbar/error_model.hpp"
#include "xbar/errors.hpp"

using namespace xbar;

namespace {

CrossbarGeometry small_geom(int rows, int cols) {
  CrossbarGeometry g;
  g.rows = rows;
  g.cols = cols;
  return g;
}

// Synthetic campaign with exact generation i_hat = m*i + c + N(0, sigma).
Campaign synthetic_campaign(int cols, int n, double m, double c, double sigma,
                            std::uint64_t seed) {
  Campaign cp;
  cp.fingerprint = ModelFingerprint{"synthetic", 1.0, 2.0, 1, cols, 0.0, 0.0, 0.5, seed, n};
  Rng rng(seed);
  for (int s = 0; s < n; ++s) {
    double ideal = rng.uniform(0.0, 3.2e-3);
    for (int j = 0; j < cols; ++j)
      cp.samples.push_back({s, j, ideal, m * ideal + c + rng.gaussian(0.0, sigma)});
  }
  return cp;
}

}  // namespace

TEST_SUITE_BEGIN("error_model");

TEST_CASE("campaign on a 2x2 grid: ideal currents and determinism") {
  auto tech = technology_by_name("TaOx");
  auto geom = small_geom(2, 2);
  Campaign cp = run_campaign(tech, geom, 1, 7);
  REQUIRE(cp.samples.size() == 2);
  REQUIRE(cp.drives.size() == 1);

  const auto& v = cp.drives[0];
  const auto& r = cp.resistances[0];
  double ideal = v[0] / r[0] + v[1] / r[1];
  for (const auto& s : cp.samples) {
    CHECK(s.i_ideal == doctest::Approx(ideal).epsilon(1e-15));
    CHECK(s.i_nonideal <= s.i_ideal);
    CHECK(s.i_nonideal > 0.0);
  }
  CHECK(cp.samples[0].column == 0);
  CHECK(cp.samples[1].column == 1);

  Campaign again = run_campaign(tech, geom, 1, 7);
  for (size_t k = 0; k < cp.samples.size(); ++k) {
    CHECK(cp.samples[k].i_ideal == again.samples[k].i_ideal);
    CHECK(cp.samples[k].i_nonideal == again.samples[k].i_nonideal);
  }

  Campaign other = run_campaign(tech, geom, 1, 8);
  CHECK(other.samples[0].i_ideal != cp.samples[0].i_ideal);
}

TEST_CASE("campaign currents respect the analytic upper bound") {
  auto tech = technology_by_name("TaOx");
  auto geom = small_geom(16, 8);
  Campaign cp = run_campaign(tech, geom, 20, 3);
  double bound = geom.rows * geom.v_max * tech.g_on();
  for (const auto& s : cp.samples) {
    CHECK(s.i_ideal <= bound);
    CHECK(s.i_nonideal <= bound);
  }
}

TEST_CASE("fit recovers exact linear data") {
  Campaign cp = synthetic_campaign(3, 200, 0.9, 1e-6, 0.0, 11);
  ColumnErrorModel model = fit_columns(cp);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(model.m[j] - 0.9) <= 1e-9);
    CHECK(std::abs(model.c[j] - 1e-6) <= 1e-12);
    CHECK(model.sigma[j] <= 1e-12);
  }
}

TEST_CASE("fit recovers sigma from noisy data at 10k samples") {
  Campaign cp = synthetic_campaign(2, 10000, 0.95, -1e-6, 2e-6, 13);
  ColumnErrorModel model = fit_columns(cp);
  for (int j = 0; j < 2; ++j) {
    CHECK(model.sigma[j] == doctest::Approx(2e-6).epsilon(0.05));
    CHECK(std::abs(model.m[j] - 0.95) <= 0.01 * 0.95);
    CHECK(model.se_m[j] > 0.0);
    CHECK(model.se_c[j] > 0.0);
  }
}

TEST_CASE("rank-deficient column is reported by index") {
  Campaign cp;
  cp.fingerprint = ModelFingerprint{"synthetic", 1.0, 2.0, 1, 1, 0.0, 0.0, 0.5, 0, 3};
  cp.samples = {{0, 0, 1e-3, 9e-4}, {1, 0, 1e-3, 9.1e-4}, {2, 0, 1e-3, 8.9e-4}};
  CHECK_THROWS_WITH_AS(fit_columns(cp),
                       doctest::Contains("column 0"), NumericError);
}

TEST_CASE("apply_error arithmetic, identity, clamping, fingerprint") {
  ColumnErrorModel model;
  model.fingerprint = ModelFingerprint{"synthetic", 1.0, 2.0, 1, 2, 0.0, 0.0, 0.5, 0, 0};
  model.m.resize(2);
  model.c.resize(2);
  model.sigma.resize(2);
  model.m << 1.0, 0.95;
  model.c << 0.0, 2e-6;
  model.sigma << 0.0, 0.0;

  Rng rng(1);
  ApplyStats stats;
  CHECK(apply_error(1e-4, 0, model, model.fingerprint, rng, &stats) == 1e-4);
  CHECK(apply_error(1e-4, 1, model, model.fingerprint, rng, &stats) ==
        doctest::Approx(9.7e-5).epsilon(1e-12));
  CHECK(stats.draws == 2);
  CHECK(stats.clamps == 0);

  // negative tail clamps to zero and is counted
  model.c[1] = -1e-3;
  CHECK(apply_error(1e-4, 1, model, model.fingerprint, rng, &stats) == 0.0);
  CHECK(stats.clamps == 1);

  ModelFingerprint other = model.fingerprint;
  other.rows = 64;
  CHECK_THROWS_AS(apply_error(1e-4, 0, model, other, rng), ContractError);
  CHECK_THROWS_AS(apply_error(1e-4, 5, model, model.fingerprint, rng), ContractError);
}

TEST_CASE("apply_error mean approaches m*I + c") {
  ColumnErrorModel model;
  model.fingerprint = ModelFingerprint{"synthetic", 1.0, 2.0, 1, 1, 0.0, 0.0, 0.5, 0, 0};
  model.m.resize(1);
  model.c.resize(1);
  model.sigma.resize(1);
  model.m << 0.9;
  model.c << 1e-6;
  model.sigma << 2e-6;

  Rng rng(21);
  const int n = 100000;
  const double i_ideal = 1e-4;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += apply_error(i_ideal, 0, model, model.fingerprint, rng);
  double want = 0.9 * i_ideal + 1e-6;
  CHECK(std::abs(sum / n - want) <= 3.0 * 2e-6 / std::sqrt(double(n)));
}

TEST_CASE("model persistence roundtrip") {
  Campaign cp = synthetic_campaign(4, 50, 0.93, -2e-7, 1e-6, 31);
  ColumnErrorModel model = fit_columns(cp);
  const char* path = "test_model_roundtrip.txt";
  save_model(path, model);
  ColumnErrorModel back = load_model(path);
  CHECK(back.fingerprint == model.fingerprint);
  REQUIRE(back.cols() == model.cols());
  for (int j = 0; j < model.cols(); ++j) {
    CHECK(back.m[j] == model.m[j]);
    CHECK(back.c[j] == model.c[j]);
    CHECK(back.sigma[j] == model.sigma[j]);
  }
  std::remove(path);

  CHECK_THROWS_AS(load_model("no_such_model.txt"), MissingArtifactError);

  const char* bad = "test_model_bad.txt";
  {
    std::ofstream out(bad);
    out << "# xbar column error model v1\nwhatever 3\n";
  }
  CHECK_THROWS_AS(load_model(bad), ConfigError);
  std::remove(bad);
}

TEST_CASE("background assumption edge cases") {
  auto tech = technology_by_name("TaOx");
  auto geom = small_geom(4, 3);

  std::vector<ConductanceGrid> empty;
  CHECK_THROWS_AS(verify_background_assumption(tech, geom, empty, 1), ContractError);

  // all devices already at R_OFF: replacing the background changes nothing
  std::vector<ConductanceGrid> snips{ConductanceGrid::Constant(4, 3, tech.g_off())};
  CHECK(verify_background_assumption(tech, geom, snips, 1) == 0.0);

  // single column: there is no background to replace
  auto geom1 = small_geom(4, 1);
  std::vector<ConductanceGrid> one{ConductanceGrid::Constant(4, 1, tech.g_on())};
  CHECK(verify_background_assumption(tech, geom1, one, 1) == 0.0);

  // a populated grid deviates a little, but not much
  std::vector<ConductanceGrid> busy{ConductanceGrid::Constant(4, 3, tech.g_on())};
  double dev = verify_background_assumption(tech, geom, busy, 1);
  CHECK(dev > 0.0);
  CHECK(dev < 0.05);
}

TEST_CASE("held-out validation of a synthetic model") {
  Campaign fit_cp = synthetic_campaign(3, 4000, 0.92, -5e-7, 1.5e-6, 41);
  ColumnErrorModel model = fit_columns(fit_cp);
  Campaign fresh = synthetic_campaign(3, 4000, 0.92, -5e-7, 1.5e-6, 42);
  HoldoutStats st = validate_model(model, fresh);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(st.mean_resid[j]) < 0.1 * model.sigma[j]);
    CHECK(st.std_resid[j] == doctest::Approx(model.sigma[j]).epsilon(0.25));
  }
}

TEST_CASE("campaign csv dump") {
  auto tech = technology_by_name("TaOx");
  Campaign cp = run_campaign(tech, small_geom(2, 2), 2, 5);
  std::ostringstream csv;
  write_campaign_csv(csv, cp);
  std::string dump = csv.str();
  CHECK(dump.find("sample,column,i_ideal,i_nonideal") == 0);
  CHECK(std::count(dump.begin(), dump.end(), '\n') == 5);  // header + 4 records
}

TEST_SUITE_END();
