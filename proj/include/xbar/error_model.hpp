#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "xbar/circuit.hpp"
#include "xbar/rng.hpp"
#include "xbar/tech.hpp"

namespace xbar {

// Provenance stamp carried by campaigns and fitted models; application
// against a different technology/geometry is rejected.
struct ModelFingerprint {
  std::string technology;
  double r_on = 0.0, r_off = 0.0;
  int rows = 0, cols = 0;
  double r_line = 0.0, r_access = 0.0, v_max = 0.0;
  std::uint64_t seed = 0;
  int samples = 0;

  bool operator==(const ModelFingerprint&) const = default;
};

ModelFingerprint make_fingerprint(const TechnologyProfile& tech, const CrossbarGeometry& geom,
                                  std::uint64_t seed, int samples);

// One characterization record: active column `column` of sample `sample` was
// driven and solved. The (V, R) draw of a sample is shared by all of its
// per-column records and lives once in Campaign::drives / resistances.
struct CampaignSample {
  int sample = 0;      // index into Campaign::drives / resistances
  int column = 0;      // active column
  double i_ideal = 0;  // A, sum_i v_i / r_i
  double i_nonideal = 0;  // A, solved with every other device at R_OFF
};

struct Campaign {
  ModelFingerprint fingerprint;
  std::vector<Eigen::VectorXd> drives;       // volts, one per sample index
  std::vector<Eigen::VectorXd> resistances;  // ohms, one per sample index
  std::vector<CampaignSample> samples;       // n_samples * cols records
};

// Draws n_samples (V, R) pairs, maps R onto each column in turn with all
// other devices at R_OFF, and records ideal vs solved currents.
// Deterministic given seed; sample s draws from substream(seed, {kCampaign, s}).
Campaign run_campaign(const TechnologyProfile& tech, const CrossbarGeometry& geom,
                      int n_samples, std::uint64_t seed);

// Max over (snippet, probed column) of |I_full - I_background| / |I_full|
// where the background run replaces every device outside the probed column
// with R_OFF. Drive vectors drawn per snippet from the seed.
double verify_background_assumption(const TechnologyProfile& tech, const CrossbarGeometry& geom,
                                    const std::vector<ConductanceGrid>& snippets,
                                    std::uint64_t seed);

// Per-column linear error model: i_hat = m*i + c + N(0, sigma).
struct ColumnErrorModel {
  Eigen::VectorXd m;      // dimensionless
  Eigen::VectorXd c;      // amperes
  Eigen::VectorXd sigma;  // amperes
  // Fit-time diagnostics (standard errors of m and c); not persisted, empty
  // on models read back from disk.
  Eigen::VectorXd se_m;
  Eigen::VectorXd se_c;
  ModelFingerprint fingerprint;

  int cols() const { return static_cast<int>(m.size()); }
};

// Independent per-column ordinary least squares of i_nonideal on i_ideal;
// sigma is the residual standard deviation (n-2 denominator).
ColumnErrorModel fit_columns(const Campaign& campaign);

struct ApplyStats {
  long long draws = 0;
  long long clamps = 0;  // negative draws clamped to 0
};

// Eq.-3 style transformation of one ideal column current. Draws exactly one
// gaussian per call (also when sigma is 0) so consumers stay draw-aligned.
// Negative results clamp to 0 A.
double apply_error(double i_ideal, int col, const ColumnErrorModel& model,
                   const ModelFingerprint& active, Rng& rng, ApplyStats* stats = nullptr);

// Same transformation with a caller-supplied standard-normal draw, for
// consumers that pin noise to physical columns independent of call order.
double apply_error(double i_ideal, int col, const ColumnErrorModel& model,
                   const ModelFingerprint& active, double z, ApplyStats* stats = nullptr);

// Held-out residual diagnostics of a model against a fresh campaign.
struct HoldoutStats {
  Eigen::VectorXd mean_resid;  // per column, amperes
  Eigen::VectorXd std_resid;   // per column, amperes
};
HoldoutStats validate_model(const ColumnErrorModel& model, const Campaign& fresh);

// Structured text persistence: fingerprint header plus one
// "index m c sigma" row per column, full double precision.
void save_model(std::ostream& out, const ColumnErrorModel& model);
void save_model(const std::string& path, const ColumnErrorModel& model);
ColumnErrorModel load_model(const std::string& path);

// CSV dump (sample, column, i_ideal, i_nonideal) for external plotting.
void write_campaign_csv(std::ostream& out, const Campaign& campaign);

}  // namespace xbar
