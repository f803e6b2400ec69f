#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "xbar/data.hpp"
#include "xbar/error_model.hpp"
#include "xbar/inference.hpp"
#include "xbar/mapping.hpp"
#include "xbar/nn.hpp"

namespace xbar {

// Per-layer column sensitivity: |dL/d(output)| accumulated over samples
// [begin, end) of the split (end = -1 takes the rest). Conv deltas average
// over output cells so the scores rank feature maps. Computed on the clean
// digital network.
std::vector<Eigen::VectorXd> accumulate_sensitivity(const NetworkParams& params,
                                                    const LabeledDataset& data,
                                                    int begin = 0, int end = -1);

// Placement from scores: the highest score takes the best slot. Slot quality
// is the within-block column index (left is best), equal-quality slots fill
// across blocks in block order; score ties keep logical order.
std::vector<int> evaluate_rank(const Eigen::VectorXd& scores, int col_blocks,
                               int cols_per_block);

struct RemapResult {
  int columns_moved = 0;                  // set_permutation move total
  std::vector<std::vector<int>> perms;    // adopted placement per layer
  std::vector<Eigen::VectorXd> scores;    // the sensitivities behind the ranking
};

// Static remapping: one sensitivity sweep over the split, ranked placement
// applied to every layer.
RemapResult srs(const NetworkParams& params, TileSet& ts, const LabeledDataset& train);

struct DrsConfig {
  int batch_size = 8;                      // samples per sensitivity refresh
  int max_batches = -1;                    // -1: one pass over the split
  std::uint64_t val_noise_seed = 1234567;  // fixed field for candidate scoring
};

struct DrsTraceRow {
  int iteration = 0;
  double candidate_accuracy = 0.0;
  bool adopted = false;
  int cumulative_moves = 0;
};

struct DrsResult {
  int columns_moved = 0;
  double start_accuracy = 0.0;  // fixed-noise validation accuracy before remaps
  double best_accuracy = 0.0;
  std::vector<DrsTraceRow> trace;
};

// Dynamic remapping: batchwise sensitivity refreshes propose placements that
// are adopted only when they strictly improve validation accuracy under the
// statistical model with a fixed noise field; writes happen on adoption only.
DrsResult drs(const NetworkParams& params, TileSet& ts, const LabeledDataset& train,
              const LabeledDataset& val, const ColumnErrorModel& model,
              const DrsConfig& cfg);

// layer,logical_col,score rows
void write_sensitivity_csv(std::ostream& out, const std::vector<Eigen::VectorXd>& scores);
// iteration,candidate_accuracy,adopted,cumulative_moves rows
void write_drs_trace_csv(std::ostream& out, const DrsResult& result);

}  // namespace xbar
