#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "xbar/errors.hpp"
#include "xbar/tech.hpp"

using namespace xbar;

TEST_SUITE_BEGIN("tech");

TEST_CASE("builtin technology table") {
  auto taox = technology_by_name("TaOx");
  CHECK(taox.r_on == doctest::Approx(20e3));
  CHECK(taox.r_off == doctest::Approx(200e3));
  CHECK(taox.g_off() == doctest::Approx(5.0e-6).epsilon(1e-12));
  CHECK(taox.g_on() == doctest::Approx(5.0e-5).epsilon(1e-12));

  auto pcm = technology_by_name("PCM");
  CHECK(pcm.r_on == doctest::Approx(60e3));
  CHECK(pcm.r_off == doctest::Approx(600e3));

  auto agsi = technology_by_name("Ag/Si");
  CHECK(agsi.r_on == doctest::Approx(100e3));
  CHECK(agsi.r_off == doctest::Approx(1e6));

  CHECK(technology_by_name("agsi").r_on == doctest::Approx(100e3));  // alias
  CHECK_THROWS_AS(technology_by_name("FeFET"), ConfigError);
}

TEST_CASE("weight_to_conductance endpoints and midpoint") {
  auto taox = technology_by_name("TaOx");
  CHECK(weight_to_conductance(0.0, taox) == doctest::Approx(5.0e-6).epsilon(1e-12));
  CHECK(weight_to_conductance(1.0, taox) == doctest::Approx(5.0e-5).epsilon(1e-12));
  CHECK(weight_to_conductance(0.5, taox) == doctest::Approx(2.75e-5).epsilon(1e-12));
  CHECK_THROWS_AS(weight_to_conductance(-0.01, taox), std::domain_error);
  CHECK_THROWS_AS(weight_to_conductance(1.01, taox), std::domain_error);

  // strictly increasing
  double prev = -1.0;
  for (int k = 0; k <= 10; ++k) {
    double gk = weight_to_conductance(k / 10.0, taox);
    CHECK(gk > prev);
    prev = gk;
  }
}

TEST_CASE("normalize_weights") {
  Eigen::MatrixXd w(1, 2);
  w << 0.2, 0.4;
  auto [n, scale] = normalize_weights(w);
  CHECK(scale == doctest::Approx(0.4));
  CHECK(n(0, 0) == doctest::Approx(0.5));
  CHECK(n(0, 1) == doctest::Approx(1.0));

  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
  auto [nz, sz] = normalize_weights(z);
  CHECK(sz == 1.0);
  CHECK(nz.isZero(0.0));

  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  auto [no, so] = normalize_weights(one);
  CHECK(so == 1.0);
  CHECK(no(0, 0) == 1.0);

  Eigen::MatrixXd neg(1, 1);
  neg << -0.5;
  CHECK_THROWS_AS(normalize_weights(neg), std::domain_error);

  // roundtrip
  Eigen::MatrixXd r = Eigen::MatrixXd::Random(5, 7).cwiseAbs();
  auto [nr, sr] = normalize_weights(r);
  CHECK(((nr * sr) - r).cwiseAbs().maxCoeff() <= 1e-12 * r.maxCoeff());
  CHECK(nr.maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("geometry and profile validation") {
  CrossbarGeometry geom;
  CHECK(geom.rows == 128);
  CHECK(geom.cols == 128);
  CHECK(geom.r_line == doctest::Approx(2.0));
  CHECK(geom.r_access == doctest::Approx(1000.0));
  CHECK(geom.v_max == doctest::Approx(0.5));
  CHECK_NOTHROW(geom.validate());

  CrossbarGeometry bad = geom;
  bad.rows = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = geom;
  bad.r_line = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = geom;
  bad.v_max = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  TechnologyProfile t{"x", 100.0, 50.0};  // r_off < r_on
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("config file roundtrip and rejection") {
  const char* path = "test_config_roundtrip.ini";
  ExperimentConfig cfg = default_config();
  cfg.seed = 99;
  cfg.campaign.samples = 123;
  cfg.geometry.rows = 64;
  cfg.technology = technology_by_name("PCM");
  {
    std::ofstream out(path);
    write_config(out, cfg);
  }
  ExperimentConfig back = load_config(path);
  CHECK(back.seed == 99);
  CHECK(back.campaign.samples == 123);
  CHECK(back.geometry.rows == 64);
  CHECK(back.technology.name == "PCM");
  CHECK(back.technology.r_on == doctest::Approx(60e3));
  std::remove(path);

  const char* badpath = "test_config_bad.ini";
  {
    std::ofstream out(badpath);
    out << "[geometry]\nrows = 16\nbogus_key = 1\n";
  }
  CHECK_THROWS_AS(load_config(badpath), ConfigError);
  try {
    load_config(badpath);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    CHECK(std::string(e.what()).find("3") != std::string::npos);  // line number
  }
  std::remove(badpath);

  CHECK_THROWS_AS(load_config("no_such_config_file.ini"), MissingArtifactError);
}

TEST_SUITE_END();
