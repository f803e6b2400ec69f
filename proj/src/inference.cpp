#include "xbar/inference.hpp"

#include <cmath>

#include "xbar/circuit.hpp"
#include "xbar/errors.hpp"
#include "xbar/rng.hpp"

namespace xbar {

void MvmStats::operator+=(const MvmStats& o) {
  apply.draws += o.apply.draws;
  apply.clamps += o.apply.clamps;
  abs_current_error += o.abs_current_error;
  readouts += o.readouts;
}

namespace {

// hardware identity of the tileset, keeping the model's campaign identity
ModelFingerprint hardware_fingerprint(const TileSet& ts, const ColumnErrorModel& model) {
  return make_fingerprint(technology_by_name(ts.technology), ts.geometry,
                          model.fingerprint.seed, model.fingerprint.samples);
}

}  // namespace

Eigen::VectorXd tile_readout(const TileSet& ts, int layer, int row_block, int col_block,
                             bool plus_plane, const Eigen::VectorXd& v,
                             const InferenceMode& mode, std::uint64_t sample,
                             std::uint64_t call, MvmStats* stats) {
  if (layer < 0 || layer >= static_cast<int>(ts.layers.size()))
    throw ContractError("tile_readout layer out of range");
  const LayerMapping& lm = ts.layers[layer];
  if (row_block < 0 || row_block >= lm.row_blocks || col_block < 0 ||
      col_block >= lm.col_blocks)
    throw ContractError("tile_readout block index out of range");
  if (v.size() != ts.geometry.rows)
    throw ContractError("tile_readout drive length does not match the geometry");

  const TechnologyProfile tech = technology_by_name(ts.technology);
  const double g_off = 1.0 / tech.r_off;
  const double dg = 1.0 / tech.r_on - g_off;
  const Eigen::MatrixXd& w = plus_plane ? lm.plus : lm.minus;

  // exact Ohm currents per physical column: the off-state baseline covers
  // every cell, active columns add their weighted part over covered rows
  const int r0 = lm.row_begin(row_block);
  const int len = lm.row_end(row_block) - r0;
  Eigen::VectorXd i_ideal =
      Eigen::VectorXd::Constant(ts.geometry.cols, g_off * v.sum());
  std::vector<int> active;  // logical columns living in this block
  active.reserve(lm.logical_cols);
  for (int l = 0; l < lm.logical_cols; ++l)
    if (lm.block_of_slot(lm.perm[l]) == col_block) active.push_back(l);
  for (int l : active)
    i_ideal[lm.col_of_slot(lm.perm[l])] +=
        dg * v.head(len).dot(w.col(l).segment(r0, len));

  switch (mode.kind) {
    case InferenceKind::kIdeal: {
      if (stats) stats->readouts += static_cast<long long>(active.size());
      return i_ideal;
    }
    case InferenceKind::kStatistical: {
      if (!mode.model)
        throw ContractError("statistical inference needs an error model");
      const ModelFingerprint fp = hardware_fingerprint(ts, *mode.model);
      Rng tile_rng(substream(mode.noise_seed,
                             {streams::kNoise, sample, static_cast<std::uint64_t>(layer),
                              call, static_cast<std::uint64_t>(row_block),
                              static_cast<std::uint64_t>(col_block),
                              plus_plane ? 1ull : 0ull}));
      // one draw per physical column, consumed in slot order, so the noise
      // field is a function of the slot and never of the placement
      Eigen::VectorXd z(ts.geometry.cols);
      for (int s = 0; s < ts.geometry.cols; ++s) z[s] = tile_rng.gaussian(0.0, 1.0);
      Eigen::VectorXd out = i_ideal;
      for (int l : active) {
        int s = lm.col_of_slot(lm.perm[l]);
        out[s] = apply_error(i_ideal[s], s, *mode.model, fp, z[s],
                             stats ? &stats->apply : nullptr);
        if (stats) {
          stats->abs_current_error += std::abs(out[s] - i_ideal[s]);
          stats->readouts++;
        }
      }
      return out;
    }
    case InferenceKind::kFullCircuit: {
      ConductanceGrid g = tile_conductances(lm, row_block, col_block, plus_plane, tech);
      ColumnCurrents out = solve_nonideal(v, g, ts.geometry);
      if (stats) {
        for (int l : active) {
          int s = lm.col_of_slot(lm.perm[l]);
          stats->abs_current_error += std::abs(out[s] - i_ideal[s]);
          stats->readouts++;
        }
      }
      return out;
    }
  }
  throw ContractError("unreachable inference kind");
}

Eigen::VectorXd noisy_layer_mvm(const TileSet& ts, int layer, const Eigen::VectorXd& a,
                                const InferenceMode& mode, std::uint64_t sample,
                                std::uint64_t call, MvmStats* stats) {
  if (layer < 0 || layer >= static_cast<int>(ts.layers.size()))
    throw ContractError("noisy_layer_mvm layer out of range");
  const LayerMapping& lm = ts.layers[layer];
  if (a.size() != lm.logical_rows)
    throw ContractError("noisy_layer_mvm input length mismatch");
  if (a.size() > 0 && a.minCoeff() < 0.0)
    throw ContractError("noisy_layer_mvm needs non-negative activations");

  Eigen::VectorXd out = Eigen::VectorXd::Zero(lm.logical_cols);
  const double amax = a.maxCoeff();
  if (!(amax > 0.0)) return out;  // nothing to drive: skip the readout

  const TechnologyProfile tech = technology_by_name(ts.technology);
  const double dg = 1.0 / tech.r_on - 1.0 / tech.r_off;
  const double rescale = amax * lm.scale / (ts.geometry.v_max * dg);

  for (int rb = 0; rb < lm.row_blocks; ++rb) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(ts.geometry.rows);
    const int r0 = lm.row_begin(rb);
    const int len = lm.row_end(rb) - r0;
    v.head(len) = a.segment(r0, len) * (ts.geometry.v_max / amax);
    for (int cb = 0; cb < lm.col_blocks; ++cb) {
      Eigen::VectorXd ip =
          tile_readout(ts, layer, rb, cb, true, v, mode, sample, call, stats);
      Eigen::VectorXd im =
          tile_readout(ts, layer, rb, cb, false, v, mode, sample, call, stats);
      for (int l = 0; l < lm.logical_cols; ++l) {
        int slot = lm.perm[l];
        if (lm.block_of_slot(slot) != cb) continue;
        int s = lm.col_of_slot(slot);
        out[l] += (ip[s] - im[s]) * rescale;
      }
    }
  }
  return out;
}

Eigen::VectorXd noisy_forward(const NetworkParams& params, const TileSet& ts,
                              const Eigen::VectorXd& input, const InferenceMode& mode,
                              std::uint64_t sample, std::vector<MvmStats>* per_layer) {
  const size_t n_layers = params.spec.layers.size();
  if (ts.layers.size() != n_layers)
    throw ContractError("tileset does not match the network layer count");
  if (input.size() != params.spec.input_count())
    throw ContractError("noisy_forward input size mismatch");
  if (per_layer) per_layer->assign(n_layers, MvmStats{});

  Eigen::VectorXd a = input;
  for (size_t l = 0; l < n_layers; ++l) {
    const LayerSpec& s = params.spec.layers[l];
    if (ts.layers[l].logical_rows != s.logical_rows() ||
        ts.layers[l].logical_cols != s.logical_columns())
      throw ContractError("tileset layer " + std::to_string(l) +
                          " does not match the network spec");
    MvmStats* stats = per_layer ? &(*per_layer)[l] : nullptr;
    Eigen::VectorXd z;
    if (s.kind == LayerKind::kDense) {
      z = noisy_layer_mvm(ts, static_cast<int>(l), a, mode, sample, 0, stats);
      z += params.biases[l];
    } else {
      const int cells = s.out_h() * s.out_w();
      Eigen::MatrixXd patches = im2col(s, a);
      z.resize(s.out_maps * cells);
      for (int c = 0; c < cells; ++c) {
        Eigen::VectorXd col = noisy_layer_mvm(ts, static_cast<int>(l), patches.col(c),
                                              mode, sample, c, stats);
        for (int m = 0; m < s.out_maps; ++m) z[m * cells + c] = col[m] + params.biases[l][m];
      }
    }
    a = s.activation == Activation::kRelu ? z.cwiseMax(0.0).eval() : z;
  }
  return a;
}

EvalReport evaluate_noisy(const NetworkParams& params, const TileSet& ts,
                          const LabeledDataset& split, const InferenceMode& mode) {
  if (split.count() < 1) throw ContractError("empty evaluation split");
  EvalReport report;
  const size_t n_layers = params.spec.layers.size();
  std::vector<double> err_sum(n_layers, 0.0);
  std::vector<long long> readouts(n_layers, 0);

  int correct = 0;
  std::vector<MvmStats> per_layer;
  for (int i = 0; i < split.count(); ++i) {
    Eigen::VectorXd scores = noisy_forward(params, ts, split.inputs.col(i), mode,
                                           static_cast<std::uint64_t>(i), &per_layer);
    Eigen::Index best;
    scores.maxCoeff(&best);
    correct += (static_cast<int>(best) == split.labels[i]);
    for (size_t l = 0; l < n_layers; ++l) {
      report.apply.draws += per_layer[l].apply.draws;
      report.apply.clamps += per_layer[l].apply.clamps;
      err_sum[l] += per_layer[l].abs_current_error;
      readouts[l] += per_layer[l].readouts;
    }
  }
  report.samples = split.count();
  report.accuracy = static_cast<double>(correct) / split.count();
  report.layer_current_mae.resize(n_layers);
  report.layer_readouts.assign(readouts.begin(), readouts.end());
  for (size_t l = 0; l < n_layers; ++l)
    report.layer_current_mae[l] = readouts[l] > 0 ? err_sum[l] / readouts[l] : 0.0;
  return report;
}

}  // namespace xbar
