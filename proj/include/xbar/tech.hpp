#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace xbar {

// An eNVM device technology, described by its low/high resistance states.
struct TechnologyProfile {
  std::string name;
  double r_on = 0.0;   // ohms, low-resistance state
  double r_off = 0.0;  // ohms, high-resistance state

  double g_on() const { return 1.0 / r_on; }
  double g_off() const { return 1.0 / r_off; }

  void validate() const;  // r_on > 0, r_off > r_on
};

// Built-in resistance ranges for common eNVM device technologies.
const std::vector<TechnologyProfile>& builtin_technologies();
TechnologyProfile technology_by_name(const std::string& name);

struct CrossbarGeometry {
  int rows = 128;
  int cols = 128;
  double r_line = 2.0;      // ohms, lumped wire resistance per cell pitch (BL and SL)
  double r_access = 1000.0; // ohms, series access-device resistance per cell
  double v_max = 0.5;       // volts, maximum BL drive voltage

  void validate() const;
  bool operator==(const CrossbarGeometry&) const = default;
};

struct TrainingConfig {
  double learning_rate = 0.05;
  int epochs = 40;
  int batch_size = 16;
  int drs_batch_size = 8;

  void validate() const;
};

struct CampaignConfig {
  int samples = 2000;  // (V, R) draws; each probes every column once
};

struct ExperimentConfig {
  TechnologyProfile technology;
  CrossbarGeometry geometry;
  TrainingConfig training;
  CampaignConfig campaign;
  std::uint64_t seed = 1;

  void validate() const;
};

ExperimentConfig default_config();

// Sectioned key=value file: [technology], [geometry], [training], [campaign].
// Unknown sections or keys are rejected.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(std::istream& in, const std::string& origin);
void write_config(std::ostream& out, const ExperimentConfig& cfg);

// Linear map from a normalized weight in [0,1] to a device conductance:
// w=0 sits at 1/r_off, w=1 at 1/r_on. Throws std::domain_error outside [0,1].
double weight_to_conductance(double w, const TechnologyProfile& tech);

// Scales a non-negative matrix into [0,1]; returns the scale (max entry, or 1
// for an all-zero matrix) so digital post-processing can undo it. Throws
// std::domain_error on negative entries.
std::pair<Eigen::MatrixXd, double> normalize_weights(const Eigen::MatrixXd& w);

}  // namespace xbar
