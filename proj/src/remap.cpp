#include "xbar/remap.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "xbar/errors.hpp"

namespace xbar {

std::vector<Eigen::VectorXd> accumulate_sensitivity(const NetworkParams& params,
                                                    const LabeledDataset& data,
                                                    int begin, int end) {
  if (end < 0) end = data.count();
  if (begin < 0 || begin >= end || end > data.count())
    throw ContractError("sensitivity window out of range");

  const size_t n_layers = params.spec.layers.size();
  std::vector<Eigen::VectorXd> scores(n_layers);
  for (size_t l = 0; l < n_layers; ++l)
    scores[l] = Eigen::VectorXd::Zero(params.spec.layers[l].logical_columns());

  for (int i = begin; i < end; ++i) {
    ForwardTrace trace = forward(params, data.inputs.col(i));
    Gradients g = backward(params, trace, data.labels[i]);
    for (size_t l = 0; l < n_layers; ++l) {
      const LayerSpec& s = params.spec.layers[l];
      const Eigen::VectorXd& delta = g.outputs[l];
      if (s.kind == LayerKind::kDense) {
        scores[l] += delta.cwiseAbs();
      } else {
        const int cells = s.out_h() * s.out_w();
        for (int m = 0; m < s.out_maps; ++m)
          scores[l][m] += delta.segment(m * cells, cells).cwiseAbs().mean();
      }
    }
  }
  return scores;
}

std::vector<int> evaluate_rank(const Eigen::VectorXd& scores, int col_blocks,
                               int cols_per_block) {
  const int n = static_cast<int>(scores.size());
  if (col_blocks < 1 || cols_per_block < 1 || n > col_blocks * cols_per_block)
    throw ContractError("evaluate_rank: scores do not fit the slots");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  std::vector<int> perm(n);
  for (int rank = 0; rank < n; ++rank) {
    // quality order: within-block column first, blocks fill left to right
    int col = rank / col_blocks;
    int block = rank % col_blocks;
    perm[order[rank]] = block * cols_per_block + col;
  }
  return perm;
}

RemapResult srs(const NetworkParams& params, TileSet& ts, const LabeledDataset& train) {
  std::vector<Eigen::VectorXd> scores = accumulate_sensitivity(params, train);
  if (scores.size() != ts.layers.size())
    throw ContractError("srs: network and tileset layer counts differ");
  RemapResult res;
  res.scores = scores;
  for (size_t l = 0; l < ts.layers.size(); ++l) {
    LayerMapping& lm = ts.layers[l];
    std::vector<int> perm = evaluate_rank(scores[l], lm.col_blocks, lm.cols_per_block);
    res.columns_moved += set_permutation(lm, perm);
    res.perms.push_back(std::move(perm));
  }
  return res;
}

DrsResult drs(const NetworkParams& params, TileSet& ts, const LabeledDataset& train,
              const LabeledDataset& val, const ColumnErrorModel& model,
              const DrsConfig& cfg) {
  if (cfg.batch_size < 1) throw ContractError("drs: batch_size must be >= 1");
  const InferenceMode mode = InferenceMode::statistical(model, cfg.val_noise_seed);

  DrsResult res;
  res.start_accuracy = evaluate_noisy(params, ts, val, mode).accuracy;
  res.best_accuracy = res.start_accuracy;

  int batches = (train.count() + cfg.batch_size - 1) / cfg.batch_size;
  if (cfg.max_batches >= 0) batches = std::min(batches, cfg.max_batches);

  for (int b = 0; b < batches; ++b) {
    const int begin = b * cfg.batch_size;
    const int end = std::min(train.count(), begin + cfg.batch_size);
    std::vector<Eigen::VectorXd> scores =
        accumulate_sensitivity(params, train, begin, end);

    // score the candidate in the model only; the array is written on adoption
    TileSet candidate = ts;
    for (size_t l = 0; l < ts.layers.size(); ++l)
      set_permutation(candidate.layers[l],
                      evaluate_rank(scores[l], ts.layers[l].col_blocks,
                                    ts.layers[l].cols_per_block));
    const double acc = evaluate_noisy(params, candidate, val, mode).accuracy;

    DrsTraceRow row;
    row.iteration = b;
    row.candidate_accuracy = acc;
    if (acc > res.best_accuracy) {
      res.best_accuracy = acc;
      for (size_t l = 0; l < ts.layers.size(); ++l)
        res.columns_moved += set_permutation(ts.layers[l], candidate.layers[l].perm);
      row.adopted = true;
    }
    row.cumulative_moves = res.columns_moved;
    res.trace.push_back(row);
  }
  return res;
}

void write_sensitivity_csv(std::ostream& out, const std::vector<Eigen::VectorXd>& scores) {
  out << "layer,logical_col,score\n";
  for (size_t l = 0; l < scores.size(); ++l)
    for (int c = 0; c < scores[l].size(); ++c)
      out << l << ',' << c << ',' << scores[l][c] << '\n';
}

void write_drs_trace_csv(std::ostream& out, const DrsResult& result) {
  out << "iteration,candidate_accuracy,adopted,cumulative_moves\n";
  for (const DrsTraceRow& row : result.trace)
    out << row.iteration << ',' << row.candidate_accuracy << ',' << (row.adopted ? 1 : 0)
        << ',' << row.cumulative_moves << '\n';
}

}  // namespace xbar
