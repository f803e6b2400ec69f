#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "xbar/nn.hpp"
#include "xbar/tech.hpp"

namespace xbar {

// A layer's logical matrix M (logical_rows x logical_cols) laid onto crossbar
// tiles: column j of M is output neuron / feature map j, so the array computes
// out = M^T v. M splits into two non-negative planes (plus / minus) sharing a
// joint scale, each tiled over ceil-divided row and column blocks of the
// crossbar geometry. Placement is metadata only: `perm` maps each logical
// column to a global physical slot (block * cols_per_block + column), and the
// stored planes stay in logical order. Unassigned slots hold w = 0, which maps
// to the off conductance.
struct LayerMapping {
  int layer_index = 0;
  int logical_rows = 0, logical_cols = 0;
  int rows_per_block = 0, cols_per_block = 0;
  int row_blocks = 0, col_blocks = 0;
  double scale = 0.0;           // joint max |M|; 0 only for an all-zero layer
  Eigen::MatrixXd plus, minus;  // normalized weights in [0, 1], logical layout
  std::vector<int> perm;        // logical column -> global physical slot

  int slots() const { return col_blocks * cols_per_block; }
  int slot_of(int logical_col) const { return perm[logical_col]; }
  int block_of_slot(int slot) const { return slot / cols_per_block; }
  int col_of_slot(int slot) const { return slot % cols_per_block; }
  // logical rows covered by a row block: [row_begin, row_end)
  int row_begin(int row_block) const { return row_block * rows_per_block; }
  int row_end(int row_block) const {
    return std::min(logical_rows, (row_block + 1) * rows_per_block);
  }
  void validate() const;
};

struct TileSet {
  NetworkSpec spec;
  CrossbarGeometry geometry;
  std::string technology;  // profile name the conductances assume
  std::vector<LayerMapping> layers;

  void validate() const;
};

// logical layer matrix from stored weights: a plain transpose for both layer
// kinds (conv rows follow the im2col patch order)
Eigen::MatrixXd flatten_kernels(const LayerSpec& spec, const Eigen::MatrixXd& weights);
Eigen::MatrixXd unflatten_kernels(const LayerSpec& spec, const Eigen::MatrixXd& flat);

struct DifferentialPair {
  Eigen::MatrixXd plus, minus;  // in [0, 1]
  double scale = 0.0;           // max |entry| of the source matrix
};

// plus = max(M,0)/s, minus = max(-M,0)/s with the joint scale s = max|M|,
// so M = s * (plus - minus); an all-zero M keeps s = 0
DifferentialPair split_differential(const Eigen::MatrixXd& m);

// lay every layer onto tiles with identity placement
TileSet map_network(const NetworkParams& params, const TechnologyProfile& tech,
                    const CrossbarGeometry& geometry);

// physical conductance grid (rows_per_block x cols_per_block) for one tile,
// permutation applied, padding at the off conductance; in siemens
Eigen::MatrixXd tile_conductances(const LayerMapping& lm, int row_block, int col_block,
                                  bool plus_plane, const TechnologyProfile& tech);

std::vector<int> identity_permutation(int logical_cols);

// replace the placement; returns how many logical columns moved (the
// reprogramming cost unit: one move rewrites that column in every row block
// of both planes)
int set_permutation(LayerMapping& lm, const std::vector<int>& perm);

// versioned binary blob
void save_tileset(const std::string& path, const TileSet& ts);
TileSet load_tileset(const std::string& path);

// one row per logical column: layer,logical_col,slot,block,col_in_block
void write_placement_csv(std::ostream& out, const TileSet& ts);

}  // namespace xbar
