#include "xbar/mapping.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <ostream>

#include "xbar/errors.hpp"

namespace xbar {

void LayerMapping::validate() const {
  if (logical_rows < 1 || logical_cols < 1)
    throw ContractError("layer mapping has empty logical matrix");
  if (rows_per_block < 1 || cols_per_block < 1)
    throw ContractError("layer mapping has empty tile geometry");
  if (row_blocks != (logical_rows + rows_per_block - 1) / rows_per_block ||
      col_blocks != (logical_cols + cols_per_block - 1) / cols_per_block)
    throw ContractError("layer mapping block counts do not cover the matrix");
  if (plus.rows() != logical_rows || plus.cols() != logical_cols ||
      minus.rows() != logical_rows || minus.cols() != logical_cols)
    throw ContractError("layer mapping plane shape mismatch");
  if (plus.size() > 0 &&
      (plus.minCoeff() < 0.0 || plus.maxCoeff() > 1.0 || minus.minCoeff() < 0.0 ||
       minus.maxCoeff() > 1.0))
    throw ContractError("layer mapping planes must lie in [0, 1]");
  if (!(scale >= 0.0)) throw ContractError("layer mapping scale must be >= 0");
  if (static_cast<int>(perm.size()) != logical_cols)
    throw ContractError("layer mapping permutation length mismatch");
  std::vector<char> used(slots(), 0);
  for (int slot : perm) {
    if (slot < 0 || slot >= slots())
      throw ContractError("layer mapping permutation slot out of range");
    if (used[slot]) throw ContractError("layer mapping permutation is not injective");
    used[slot] = 1;
  }
}

void TileSet::validate() const {
  spec.validate();
  geometry.validate();
  if (technology.empty()) throw ContractError("tileset names no technology");
  if (layers.size() != spec.layers.size())
    throw ContractError("tileset layer count does not match the network");
  for (size_t l = 0; l < layers.size(); ++l) {
    const LayerMapping& lm = layers[l];
    lm.validate();
    if (lm.layer_index != static_cast<int>(l))
      throw ContractError("tileset layer order is scrambled");
    if (lm.logical_rows != spec.layers[l].logical_rows() ||
        lm.logical_cols != spec.layers[l].logical_columns())
      throw ContractError("tileset layer " + std::to_string(l) +
                          " shape does not match the network spec");
    if (lm.rows_per_block != geometry.rows || lm.cols_per_block != geometry.cols)
      throw ContractError("tileset tile shape does not match the geometry");
  }
}

Eigen::MatrixXd flatten_kernels(const LayerSpec& spec, const Eigen::MatrixXd& weights) {
  long wr = spec.kind == LayerKind::kDense ? spec.out_features : spec.out_maps;
  long wc = spec.kind == LayerKind::kDense ? spec.in_features : spec.patch_len();
  if (weights.rows() != wr || weights.cols() != wc)
    throw ContractError("flatten_kernels weight shape mismatch");
  return weights.transpose();
}

Eigen::MatrixXd unflatten_kernels(const LayerSpec& spec, const Eigen::MatrixXd& flat) {
  if (flat.rows() != spec.logical_rows() || flat.cols() != spec.logical_columns())
    throw ContractError("unflatten_kernels matrix shape mismatch");
  return flat.transpose();
}

DifferentialPair split_differential(const Eigen::MatrixXd& m) {
  DifferentialPair pair;
  pair.scale = m.size() > 0 ? m.cwiseAbs().maxCoeff() : 0.0;
  if (pair.scale == 0.0) {
    pair.plus = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    pair.minus = pair.plus;
    return pair;
  }
  pair.plus = m.cwiseMax(0.0) / pair.scale;
  pair.minus = (-m).cwiseMax(0.0) / pair.scale;
  return pair;
}

std::vector<int> identity_permutation(int logical_cols) {
  std::vector<int> perm(logical_cols);
  for (int i = 0; i < logical_cols; ++i) perm[i] = i;
  return perm;
}

TileSet map_network(const NetworkParams& params, const TechnologyProfile& tech,
                    const CrossbarGeometry& geometry) {
  params.validate();
  tech.validate();
  geometry.validate();
  TileSet ts;
  ts.spec = params.spec;
  ts.geometry = geometry;
  ts.technology = tech.name;
  for (size_t l = 0; l < params.spec.layers.size(); ++l) {
    const LayerSpec& spec = params.spec.layers[l];
    LayerMapping lm;
    lm.layer_index = static_cast<int>(l);
    lm.logical_rows = spec.logical_rows();
    lm.logical_cols = spec.logical_columns();
    lm.rows_per_block = geometry.rows;
    lm.cols_per_block = geometry.cols;
    lm.row_blocks = (lm.logical_rows + geometry.rows - 1) / geometry.rows;
    lm.col_blocks = (lm.logical_cols + geometry.cols - 1) / geometry.cols;
    DifferentialPair pair = split_differential(flatten_kernels(spec, params.weights[l]));
    lm.scale = pair.scale;
    lm.plus = std::move(pair.plus);
    lm.minus = std::move(pair.minus);
    lm.perm = identity_permutation(lm.logical_cols);
    lm.validate();
    ts.layers.push_back(std::move(lm));
  }
  return ts;
}

Eigen::MatrixXd tile_conductances(const LayerMapping& lm, int row_block, int col_block,
                                  bool plus_plane, const TechnologyProfile& tech) {
  if (row_block < 0 || row_block >= lm.row_blocks || col_block < 0 ||
      col_block >= lm.col_blocks)
    throw ContractError("tile block index out of range");
  const Eigen::MatrixXd& w = plus_plane ? lm.plus : lm.minus;
  const double g_off = weight_to_conductance(0.0, tech);
  Eigen::MatrixXd g =
      Eigen::MatrixXd::Constant(lm.rows_per_block, lm.cols_per_block, g_off);
  const int r0 = lm.row_begin(row_block), r1 = lm.row_end(row_block);
  for (int l = 0; l < lm.logical_cols; ++l) {
    int slot = lm.perm[l];
    if (lm.block_of_slot(slot) != col_block) continue;
    int s = lm.col_of_slot(slot);
    for (int r = r0; r < r1; ++r) g(r - r0, s) = weight_to_conductance(w(r, l), tech);
  }
  return g;
}

int set_permutation(LayerMapping& lm, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != lm.logical_cols)
    throw ContractError("set_permutation length mismatch");
  std::vector<char> used(lm.slots(), 0);
  for (int slot : perm) {
    if (slot < 0 || slot >= lm.slots())
      throw ContractError("set_permutation slot out of range");
    if (used[slot]) throw ContractError("set_permutation is not injective");
    used[slot] = 1;
  }
  int moved = 0;
  for (int l = 0; l < lm.logical_cols; ++l) moved += (perm[l] != lm.perm[l]);
  lm.perm = perm;
  return moved;
}

namespace {

constexpr char kTileSetMagic[8] = {'X', 'B', 'T', 'S', '1', '\n', '\0', '\0'};

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void get(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void put_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  std::int64_t rows = m.rows(), cols = m.cols();
  put(out, rows);
  put(out, cols);
  out.write(reinterpret_cast<const char*>(m.data()), sizeof(double) * rows * cols);
}

Eigen::MatrixXd get_matrix(std::ifstream& in, const std::string& path) {
  std::int64_t rows = 0, cols = 0;
  get(in, rows);
  get(in, cols);
  if (!in || rows < 1 || cols < 1 || rows * cols > (1ll << 28))
    throw ConfigError("tileset file " + path + ": bad matrix shape");
  Eigen::MatrixXd m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), sizeof(double) * rows * cols);
  if (!in) throw ConfigError("tileset file " + path + ": truncated matrix");
  return m;
}

}  // namespace

void save_tileset(const std::string& path, const TileSet& ts) {
  ts.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifactError("cannot write tileset file " + path);
  out.write(kTileSetMagic, sizeof(kTileSetMagic));

  std::int32_t n_layers = static_cast<std::int32_t>(ts.spec.layers.size());
  put(out, n_layers);
  for (const LayerSpec& s : ts.spec.layers) {
    std::int32_t fields[9] = {static_cast<std::int32_t>(s.kind),
                              static_cast<std::int32_t>(s.activation),
                              s.in_features,
                              s.out_features,
                              s.in_channels,
                              s.out_maps,
                              s.in_h,
                              s.in_w,
                              s.kernel};
    out.write(reinterpret_cast<const char*>(fields), sizeof(fields));
  }

  std::int32_t geom[2] = {ts.geometry.rows, ts.geometry.cols};
  out.write(reinterpret_cast<const char*>(geom), sizeof(geom));
  put(out, ts.geometry.r_line);
  put(out, ts.geometry.r_access);
  put(out, ts.geometry.v_max);
  std::int32_t name_len = static_cast<std::int32_t>(ts.technology.size());
  put(out, name_len);
  out.write(ts.technology.data(), name_len);

  for (const LayerMapping& lm : ts.layers) {
    put(out, lm.scale);
    put_matrix(out, lm.plus);
    put_matrix(out, lm.minus);
    for (int slot : lm.perm) {
      std::int32_t s = slot;
      put(out, s);
    }
  }
}

TileSet load_tileset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("tileset file not found: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kTileSetMagic, sizeof(magic)) != 0)
    throw ConfigError("tileset file " + path + ": unrecognized format");

  TileSet ts;
  std::int32_t n_layers = 0;
  get(in, n_layers);
  if (!in || n_layers < 1 || n_layers > 1024)
    throw ConfigError("tileset file " + path + ": bad layer count");
  for (std::int32_t l = 0; l < n_layers; ++l) {
    std::int32_t fields[9];
    in.read(reinterpret_cast<char*>(fields), sizeof(fields));
    LayerSpec s;
    s.kind = static_cast<LayerKind>(fields[0]);
    s.activation = static_cast<Activation>(fields[1]);
    s.in_features = fields[2];
    s.out_features = fields[3];
    s.in_channels = fields[4];
    s.out_maps = fields[5];
    s.in_h = fields[6];
    s.in_w = fields[7];
    s.kernel = fields[8];
    ts.spec.layers.push_back(s);
  }

  std::int32_t geom[2];
  in.read(reinterpret_cast<char*>(geom), sizeof(geom));
  ts.geometry.rows = geom[0];
  ts.geometry.cols = geom[1];
  get(in, ts.geometry.r_line);
  get(in, ts.geometry.r_access);
  get(in, ts.geometry.v_max);
  std::int32_t name_len = 0;
  get(in, name_len);
  if (!in || name_len < 1 || name_len > 256)
    throw ConfigError("tileset file " + path + ": bad technology name");
  ts.technology.resize(name_len);
  in.read(ts.technology.data(), name_len);

  for (std::int32_t l = 0; l < n_layers; ++l) {
    const LayerSpec& s = ts.spec.layers[l];
    LayerMapping lm;
    lm.layer_index = l;
    lm.logical_rows = s.logical_rows();
    lm.logical_cols = s.logical_columns();
    lm.rows_per_block = ts.geometry.rows;
    lm.cols_per_block = ts.geometry.cols;
    lm.row_blocks = (lm.logical_rows + ts.geometry.rows - 1) / ts.geometry.rows;
    lm.col_blocks = (lm.logical_cols + ts.geometry.cols - 1) / ts.geometry.cols;
    get(in, lm.scale);
    lm.plus = get_matrix(in, path);
    lm.minus = get_matrix(in, path);
    lm.perm.resize(lm.logical_cols);
    for (int& slot : lm.perm) {
      std::int32_t v = 0;
      get(in, v);
      slot = v;
    }
    if (!in) throw ConfigError("tileset file " + path + ": truncated");
    ts.layers.push_back(std::move(lm));
  }
  try {
    ts.validate();
  } catch (const ContractError& e) {
    throw ConfigError("tileset file " + path + ": " + e.what());
  }
  return ts;
}

void write_placement_csv(std::ostream& out, const TileSet& ts) {
  out << "layer,logical_col,slot,block,col_in_block\n";
  for (const LayerMapping& lm : ts.layers)
    for (int l = 0; l < lm.logical_cols; ++l) {
      int slot = lm.perm[l];
      out << lm.layer_index << ',' << l << ',' << slot << ',' << lm.block_of_slot(slot)
          << ',' << lm.col_of_slot(slot) << '\n';
    }
}

}  // namespace xbar
