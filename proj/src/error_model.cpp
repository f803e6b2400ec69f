#include "xbar/error_model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "xbar/errors.hpp"

namespace xbar {

ModelFingerprint make_fingerprint(const TechnologyProfile& tech, const CrossbarGeometry& geom,
                                  std::uint64_t seed, int samples) {
  return ModelFingerprint{tech.name, tech.r_on,     tech.r_off, geom.rows, geom.cols,
                          geom.r_line, geom.r_access, geom.v_max, seed,      samples};
}

Campaign run_campaign(const TechnologyProfile& tech, const CrossbarGeometry& geom,
                      int n_samples, std::uint64_t seed) {
  tech.validate();
  geom.validate();
  if (n_samples < 1) throw ContractError("run_campaign needs n_samples >= 1");

  const int rows = geom.rows, cols = geom.cols;
  const double g_off = tech.g_off();

  Campaign out;
  out.fingerprint = make_fingerprint(tech, geom, seed, n_samples);
  out.drives.reserve(n_samples);
  out.resistances.reserve(n_samples);
  out.samples.reserve(static_cast<size_t>(n_samples) * cols);

  ConductanceGrid grid = ConductanceGrid::Constant(rows, cols, g_off);
  for (int s = 0; s < n_samples; ++s) {
    Rng rng(substream(seed, {streams::kCampaign, static_cast<std::uint64_t>(s)}));
    Eigen::VectorXd v(rows), r(rows);
    for (int i = 0; i < rows; ++i) v[i] = rng.uniform(0.0, geom.v_max);
    for (int i = 0; i < rows; ++i) r[i] = rng.uniform(tech.r_on, tech.r_off);

    double ideal = 0.0;
    for (int i = 0; i < rows; ++i) ideal += v[i] / r[i];

    for (int j = 0; j < cols; ++j) {
      grid.col(j) = r.cwiseInverse();
      double nonideal = solve_nonideal(v, grid, geom)[j];
      grid.col(j).setConstant(g_off);
      out.samples.push_back({s, j, ideal, nonideal});
    }
    out.drives.push_back(std::move(v));
    out.resistances.push_back(std::move(r));
  }
  return out;
}

double verify_background_assumption(const TechnologyProfile& tech, const CrossbarGeometry& geom,
                                    const std::vector<ConductanceGrid>& snippets,
                                    std::uint64_t seed) {
  tech.validate();
  geom.validate();
  if (snippets.empty()) throw ContractError("verify_background_assumption: no snippets");

  const double g_off = tech.g_off();
  double worst = 0.0;
  for (size_t k = 0; k < snippets.size(); ++k) {
    const ConductanceGrid& snip = snippets[k];
    if (snip.rows() != geom.rows || snip.cols() != geom.cols)
      throw ContractError("snippet " + std::to_string(k) + " does not match geometry");

    Rng rng(substream(seed, {streams::kBackground, static_cast<std::uint64_t>(k)}));
    Eigen::VectorXd v(geom.rows);
    for (int i = 0; i < geom.rows; ++i) v[i] = rng.uniform(0.0, geom.v_max);

    ColumnCurrents full = solve_nonideal(v, snip, geom);
    ConductanceGrid bg = ConductanceGrid::Constant(geom.rows, geom.cols, g_off);
    for (int j = 0; j < geom.cols; ++j) {
      bg.col(j) = snip.col(j);
      double probed = solve_nonideal(v, bg, geom)[j];
      bg.col(j).setConstant(g_off);
      double denom = std::max(std::abs(full[j]), std::numeric_limits<double>::min());
      worst = std::max(worst, std::abs(full[j] - probed) / denom);
    }
  }
  return worst;
}

ColumnErrorModel fit_columns(const Campaign& campaign) {
  const int cols = campaign.fingerprint.cols;
  if (cols < 1) throw ContractError("campaign fingerprint has no columns");

  std::vector<long long> n(cols, 0);
  std::vector<double> sx(cols, 0.0), sy(cols, 0.0);
  for (const CampaignSample& s : campaign.samples) {
    if (s.column < 0 || s.column >= cols) throw ContractError("sample column out of range");
    n[s.column]++;
    sx[s.column] += s.i_ideal;
    sy[s.column] += s.i_nonideal;
  }

  std::vector<double> sxx(cols, 0.0), sxy(cols, 0.0);
  for (const CampaignSample& s : campaign.samples) {
    double dx = s.i_ideal - sx[s.column] / n[s.column];
    sxx[s.column] += dx * dx;
    sxy[s.column] += dx * (s.i_nonideal - sy[s.column] / n[s.column]);
  }

  ColumnErrorModel model;
  model.fingerprint = campaign.fingerprint;
  model.m.resize(cols);
  model.c.resize(cols);
  model.sigma.resize(cols);
  model.se_m.resize(cols);
  model.se_c.resize(cols);

  for (int j = 0; j < cols; ++j) {
    if (n[j] < 2)
      throw NumericError("column " + std::to_string(j) + " has fewer than 2 samples");
    double xbar = sx[j] / n[j], ybar = sy[j] / n[j];
    if (sxx[j] <= 0.0)
      throw NumericError("column " + std::to_string(j) +
                         " is rank-deficient: all ideal currents identical");
    model.m[j] = sxy[j] / sxx[j];
    model.c[j] = ybar - model.m[j] * xbar;
  }

  std::vector<double> ssr(cols, 0.0);
  for (const CampaignSample& s : campaign.samples) {
    double e = s.i_nonideal - (model.m[s.column] * s.i_ideal + model.c[s.column]);
    ssr[s.column] += e * e;
  }
  for (int j = 0; j < cols; ++j) {
    double var = n[j] > 2 ? ssr[j] / (n[j] - 2) : 0.0;
    model.sigma[j] = std::sqrt(std::max(var, 0.0));
    model.se_m[j] = model.sigma[j] / std::sqrt(sxx[j]);
    double xbar = sx[j] / n[j];
    model.se_c[j] = model.sigma[j] * std::sqrt(1.0 / n[j] + xbar * xbar / sxx[j]);
  }
  return model;
}

double apply_error(double i_ideal, int col, const ColumnErrorModel& model,
                   const ModelFingerprint& active, double z, ApplyStats* stats) {
  if (!(model.fingerprint == active))
    throw ContractError("error model fingerprint does not match the active crossbar (model: " +
                        model.fingerprint.technology + " " +
                        std::to_string(model.fingerprint.rows) + "x" +
                        std::to_string(model.fingerprint.cols) + ")");
  if (col < 0 || col >= model.cols())
    throw ContractError("apply_error column " + std::to_string(col) + " out of range");

  double out = model.m[col] * i_ideal + model.c[col] + model.sigma[col] * z;
  if (stats) stats->draws++;
  if (out < 0.0) {
    out = 0.0;
    if (stats) stats->clamps++;
  }
  return out;
}

double apply_error(double i_ideal, int col, const ColumnErrorModel& model,
                   const ModelFingerprint& active, Rng& rng, ApplyStats* stats) {
  return apply_error(i_ideal, col, model, active, rng.gaussian(0.0, 1.0), stats);
}

HoldoutStats validate_model(const ColumnErrorModel& model, const Campaign& fresh) {
  const int cols = model.cols();
  if (fresh.fingerprint.cols != cols)
    throw ContractError("held-out campaign column count differs from model");

  std::vector<long long> n(cols, 0);
  std::vector<double> sum(cols, 0.0);
  for (const CampaignSample& s : fresh.samples) {
    n[s.column]++;
    sum[s.column] += s.i_nonideal - (model.m[s.column] * s.i_ideal + model.c[s.column]);
  }
  HoldoutStats st;
  st.mean_resid = Eigen::VectorXd::Zero(cols);
  st.std_resid = Eigen::VectorXd::Zero(cols);
  for (int j = 0; j < cols; ++j) {
    if (n[j] == 0) throw ContractError("held-out campaign missing column " + std::to_string(j));
    st.mean_resid[j] = sum[j] / n[j];
  }
  std::vector<double> sq(cols, 0.0);
  for (const CampaignSample& s : fresh.samples) {
    double e = s.i_nonideal - (model.m[s.column] * s.i_ideal + model.c[s.column]) -
               st.mean_resid[s.column];
    sq[s.column] += e * e;
  }
  for (int j = 0; j < cols; ++j)
    st.std_resid[j] = n[j] > 1 ? std::sqrt(sq[j] / (n[j] - 1)) : 0.0;
  return st;
}

namespace {

void write_fingerprint(std::ostream& out, const ModelFingerprint& fp) {
  out << std::setprecision(17);
  out << "technology " << fp.technology << "\n"
      << "r_on " << fp.r_on << "\n"
      << "r_off " << fp.r_off << "\n"
      << "rows " << fp.rows << "\n"
      << "cols " << fp.cols << "\n"
      << "r_line " << fp.r_line << "\n"
      << "r_access " << fp.r_access << "\n"
      << "v_max " << fp.v_max << "\n"
      << "seed " << fp.seed << "\n"
      << "samples " << fp.samples << "\n";
}

}  // namespace

void save_model(std::ostream& out, const ColumnErrorModel& model) {
  out << "# xbar column error model v1\n";
  write_fingerprint(out, model.fingerprint);
  out << "columns " << model.cols() << "\n";
  out << "# index m c sigma\n";
  out << std::setprecision(17);
  for (int j = 0; j < model.cols(); ++j)
    out << j << " " << model.m[j] << " " << model.c[j] << " " << model.sigma[j] << "\n";
}

void save_model(const std::string& path, const ColumnErrorModel& model) {
  std::ofstream out(path);
  if (!out) throw MissingArtifactError("cannot write model file " + path);
  save_model(out, model);
}

ColumnErrorModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("model file not found: " + path);

  auto fail = [&](const std::string& why) {
    throw ConfigError("model file " + path + ": " + why);
  };

  std::string line;
  if (!std::getline(in, line) || line != "# xbar column error model v1")
    fail("unrecognized header");

  ColumnErrorModel model;
  int columns = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') break;  // column table follows
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "technology")
      ls >> model.fingerprint.technology;
    else if (key == "r_on")
      ls >> model.fingerprint.r_on;
    else if (key == "r_off")
      ls >> model.fingerprint.r_off;
    else if (key == "rows")
      ls >> model.fingerprint.rows;
    else if (key == "cols")
      ls >> model.fingerprint.cols;
    else if (key == "r_line")
      ls >> model.fingerprint.r_line;
    else if (key == "r_access")
      ls >> model.fingerprint.r_access;
    else if (key == "v_max")
      ls >> model.fingerprint.v_max;
    else if (key == "seed")
      ls >> model.fingerprint.seed;
    else if (key == "samples")
      ls >> model.fingerprint.samples;
    else if (key == "columns")
      ls >> columns;
    else
      fail("unknown header key '" + key + "'");
    if (!ls) fail("bad value for '" + key + "'");
  }
  if (columns < 1) fail("missing column count");

  model.m.resize(columns);
  model.c.resize(columns);
  model.sigma.resize(columns);
  for (int j = 0; j < columns; ++j) {
    if (!std::getline(in, line)) fail("truncated column table");
    std::istringstream ls(line);
    int idx;
    ls >> idx >> model.m[j] >> model.c[j] >> model.sigma[j];
    if (!ls || idx != j) fail("bad column row " + std::to_string(j));
  }
  return model;
}

void write_campaign_csv(std::ostream& out, const Campaign& campaign) {
  out << "sample,column,i_ideal,i_nonideal\n";
  out << std::setprecision(17);
  for (const CampaignSample& s : campaign.samples)
    out << s.sample << "," << s.column << "," << s.i_ideal << "," << s.i_nonideal << "\n";
}

}  // namespace xbar
