#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "xbar/data.hpp"
#include "xbar/error_model.hpp"
#include "xbar/mapping.hpp"
#include "xbar/nn.hpp"

namespace xbar {

enum class InferenceKind { kIdeal, kStatistical, kFullCircuit };

// How tile readouts turn conductances and drives into column currents:
//   ideal        exact Ohm sums, no parasitics (permutation cannot matter)
//   statistical  Ohm sums pushed through the per-column error model, noise
//                pinned to physical columns via per-readout substreams
//   full circuit nodal solve of every tile readout
struct InferenceMode {
  InferenceKind kind = InferenceKind::kIdeal;
  const ColumnErrorModel* model = nullptr;  // statistical
  std::uint64_t noise_seed = 0;             // statistical

  static InferenceMode ideal() { return {}; }
  static InferenceMode statistical(const ColumnErrorModel& m, std::uint64_t noise_seed) {
    return {InferenceKind::kStatistical, &m, noise_seed};
  }
  static InferenceMode full_circuit() { return {InferenceKind::kFullCircuit, nullptr, 0}; }
};

struct MvmStats {
  ApplyStats apply;                  // statistical draws / clamps
  double abs_current_error = 0.0;    // sum |i_mode - i_ideal| over readouts, amps
  long long readouts = 0;            // modeled column readouts
  void operator+=(const MvmStats& o);
};

// One analog readout of a tile plane: per-physical-column currents in amps
// for the drive v (volts, length geometry rows; padded rows at 0 V).
// (sample, call) identify the readout for noise substreams: call counts MVM
// invocations within the layer (conv output cells). Statistical mode models
// the active columns and reports padding columns at their ideal current.
Eigen::VectorXd tile_readout(const TileSet& ts, int layer, int row_block, int col_block,
                             bool plus_plane, const Eigen::VectorXd& v,
                             const InferenceMode& mode, std::uint64_t sample,
                             std::uint64_t call, MvmStats* stats = nullptr);

// out = M^T a for one layer through the selected hardware path: activations
// scale onto [0, v_max] drives, differential tile readouts subtract, partial
// sums accumulate over row blocks, and the result rescales back to logical
// units. a must be non-negative.
Eigen::VectorXd noisy_layer_mvm(const TileSet& ts, int layer, const Eigen::VectorXd& a,
                                const InferenceMode& mode, std::uint64_t sample,
                                std::uint64_t call, MvmStats* stats = nullptr);

// Full-network forward with every linear stage on the crossbars; biases and
// activations stay digital. per_layer, when given, is resized to one
// MvmStats per layer.
Eigen::VectorXd noisy_forward(const NetworkParams& params, const TileSet& ts,
                              const Eigen::VectorXd& input, const InferenceMode& mode,
                              std::uint64_t sample,
                              std::vector<MvmStats>* per_layer = nullptr);

struct EvalReport {
  double accuracy = 0.0;
  long long samples = 0;
  ApplyStats apply;                       // aggregated statistical draws / clamps
  std::vector<double> layer_current_mae;  // mean |i_mode - i_ideal| per layer, amps
  std::vector<long long> layer_readouts;
  double clamp_rate() const {
    return apply.draws > 0 ? static_cast<double>(apply.clamps) / apply.draws : 0.0;
  }
};

// Accuracy of the mapped network over a split; sample index within the split
// seeds the per-sample noise.
EvalReport evaluate_noisy(const NetworkParams& params, const TileSet& ts,
                          const LabeledDataset& split, const InferenceMode& mode);

}  // namespace xbar
