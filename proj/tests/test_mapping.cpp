#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "xbar/errors.hpp"
#include "xbar/mapping.hpp"
#include "xbar/rng.hpp"

using namespace xbar;

namespace {

const TechnologyProfile& taox() { return builtin_technologies()[0]; }

NetworkParams dense_single(int in, int out, std::uint64_t seed) {
  NetworkSpec spec;
  LayerSpec head;
  head.in_features = in;
  head.out_features = out;
  spec.layers = {head};
  return init_network(spec, seed);
}

CrossbarGeometry small_geometry() {
  CrossbarGeometry g;
  g.rows = 8;
  g.cols = 4;
  return g;  // keeps r_line/r_access/v_max defaults
}

}  // namespace

TEST_SUITE("mapping") {
  TEST_CASE("flatten/unflatten is a transpose and roundtrips") {
    LayerSpec conv;
    conv.kind = LayerKind::kConv;
    conv.in_channels = 2;
    conv.out_maps = 3;
    conv.in_h = conv.in_w = 4;
    conv.kernel = 2;
    Eigen::MatrixXd w = Eigen::MatrixXd::Random(3, 8);  // out_maps x patch_len
    Eigen::MatrixXd flat = flatten_kernels(conv, w);
    CHECK(flat.rows() == 8);
    CHECK(flat.cols() == 3);
    CHECK(flat(5, 2) == w(2, 5));
    CHECK((unflatten_kernels(conv, flat) - w).cwiseAbs().maxCoeff() == 0.0);

    LayerSpec dense;
    dense.in_features = 4;
    dense.out_features = 2;
    Eigen::MatrixXd wd = Eigen::MatrixXd::Random(2, 4);
    Eigen::MatrixXd fd = flatten_kernels(dense, wd);
    CHECK(fd.rows() == 4);
    CHECK(fd(3, 1) == wd(1, 3));
    CHECK((unflatten_kernels(dense, fd) - wd).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(flatten_kernels(dense, w), ContractError);
  }

  TEST_CASE("differential split reconstructs the matrix with a joint scale") {
    Eigen::MatrixXd m(2, 3);
    m << 0.4, -1.6, 0.0,
         -0.2, 0.8, 1.2;
    DifferentialPair p = split_differential(m);
    CHECK(p.scale == 1.6);
    CHECK((p.scale * (p.plus - p.minus) - m).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(p.plus.minCoeff() >= 0.0);
    CHECK(p.minus.minCoeff() >= 0.0);
    CHECK(p.plus.maxCoeff() <= 1.0);
    CHECK(p.minus.maxCoeff() <= 1.0);
    // supports are disjoint: a cell is positive in at most one plane
    CHECK(p.plus.cwiseProduct(p.minus).maxCoeff() == 0.0);

    DifferentialPair z = split_differential(Eigen::MatrixXd::Zero(3, 3));
    CHECK(z.scale == 0.0);
    CHECK(z.plus.maxCoeff() == 0.0);
    CHECK(z.minus.maxCoeff() == 0.0);
  }

  TEST_CASE("desk network tiles onto the default geometry") {
    NetworkParams p = init_network(desk_network_spec(), 4);
    CrossbarGeometry geom;  // 128x128 defaults
    TileSet ts = map_network(p, taox(), geom);
    ts.validate();
    CHECK(ts.technology == "TaOx");
    REQUIRE(ts.layers.size() == 4);
    int want_rb[] = {1, 1, 2, 1};
    int want_cb[] = {1, 1, 1, 1};
    for (int l = 0; l < 4; ++l) {
      CHECK(ts.layers[l].row_blocks == want_rb[l]);
      CHECK(ts.layers[l].col_blocks == want_cb[l]);
      CHECK(ts.layers[l].scale > 0.0);
      CHECK(ts.layers[l].perm == identity_permutation(ts.layers[l].logical_cols));
    }
    CHECK(ts.layers[2].logical_rows == 256);
    CHECK(ts.layers[2].row_end(0) == 128);
    CHECK(ts.layers[2].row_end(1) == 256);
    CHECK(ts.layers[3].row_end(0) == 128);  // fc2: 128 rows exactly fill one block
  }

  TEST_CASE("partial sums over permuted physical tiles reproduce M^T a") {
    // 10x6 logical matrix on 8x4 tiles: 2 row blocks, 2 column blocks
    NetworkParams params = dense_single(10, 6, 17);
    CrossbarGeometry geom = small_geometry();
    TileSet ts = map_network(params, taox(), geom);
    LayerMapping& lm = ts.layers[0];
    REQUIRE(lm.row_blocks == 2);
    REQUIRE(lm.col_blocks == 2);
    // scatter logical columns across both blocks
    int moved = set_permutation(lm, {5, 2, 7, 0, 4, 1});
    CHECK(moved == 5);  // column 4 keeps its slot

    Rng rng(substream(17, {0xA1}));
    Eigen::VectorXd a(10);
    for (int i = 0; i < 10; ++i) a[i] = rng.uniform();  // nonneg activations
    const double amax = a.maxCoeff();
    const double g_on = 1.0 / taox().r_on, g_off = 1.0 / taox().r_off;

    Eigen::MatrixXd m = flatten_kernels(params.spec.layers[0], params.weights[0]);
    Eigen::VectorXd want = m.transpose() * a;

    Eigen::VectorXd got = Eigen::VectorXd::Zero(6);
    for (int rb = 0; rb < lm.row_blocks; ++rb) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(geom.rows);
      for (int r = lm.row_begin(rb); r < lm.row_end(rb); ++r)
        v[r - lm.row_begin(rb)] = a[r] * geom.v_max / amax;
      for (int cb = 0; cb < lm.col_blocks; ++cb) {
        Eigen::MatrixXd gp = tile_conductances(lm, rb, cb, true, taox());
        Eigen::MatrixXd gm = tile_conductances(lm, rb, cb, false, taox());
        for (int l = 0; l < lm.logical_cols; ++l) {
          int slot = lm.slot_of(l);
          if (lm.block_of_slot(slot) != cb) continue;
          int s = lm.col_of_slot(slot);
          double i_diff = v.dot(gp.col(s) - gm.col(s));
          got[l] += i_diff * amax * lm.scale / (geom.v_max * (g_on - g_off));
        }
      }
    }
    CHECK((got - want).cwiseAbs().maxCoeff() <
          1e-9 * std::max(1.0, want.cwiseAbs().maxCoeff()));
  }

  TEST_CASE("tile conductances place columns and pad with the off state") {
    NetworkParams params = dense_single(10, 6, 23);
    CrossbarGeometry geom = small_geometry();
    TileSet ts = map_network(params, taox(), geom);
    LayerMapping& lm = ts.layers[0];
    lm.plus(0, 3) = 1.0;  // force a known on-state cell in logical column 3
    set_permutation(lm, {5, 2, 7, 0, 4, 1});

    const double g_on = 1.0 / taox().r_on, g_off = 1.0 / taox().r_off;
    // logical column 3 sits at slot 0 = block 0, col 0; row block 0 covers row 0
    Eigen::MatrixXd g00p = tile_conductances(lm, 0, 0, true, taox());
    CHECK(g00p(0, 0) == g_on);
    // slots 3 and 6 are unassigned: block 0 col 3 and block 1 col 2 stay off
    CHECK((g00p.col(3).array() == g_off).all());
    Eigen::MatrixXd g11p = tile_conductances(lm, 1, 1, true, taox());
    CHECK((g11p.col(2).array() == g_off).all());
    // padded rows beyond the matrix (row block 1 rows 2..7) stay off
    CHECK((g11p.bottomRows(6).array() == g_off).all());
    CHECK_THROWS_AS(tile_conductances(lm, 2, 0, true, taox()), ContractError);
    CHECK_THROWS_AS(tile_conductances(lm, 0, 2, true, taox()), ContractError);
  }

  TEST_CASE("set_permutation counts moved columns and validates input") {
    NetworkParams params = dense_single(6, 4, 29);
    CrossbarGeometry geom = small_geometry();
    TileSet ts = map_network(params, taox(), geom);
    LayerMapping& lm = ts.layers[0];
    CHECK(set_permutation(lm, {0, 1, 2, 3}) == 0);
    CHECK(set_permutation(lm, {1, 0, 2, 3}) == 2);
    CHECK(lm.slot_of(0) == 1);
    CHECK(set_permutation(lm, {1, 0, 3, 2}) == 2);
    CHECK_THROWS_AS(set_permutation(lm, {0, 1, 2}), ContractError);
    CHECK_THROWS_AS(set_permutation(lm, {0, 1, 2, 2}), ContractError);
    CHECK_THROWS_AS(set_permutation(lm, {0, 1, 2, 4}), ContractError);
    CHECK_THROWS_AS(set_permutation(lm, {0, 1, 2, -1}), ContractError);
  }

  TEST_CASE("tileset persistence roundtrips bitwise") {
    NetworkParams p = init_network(desk_network_spec(), 31);
    CrossbarGeometry geom;
    TileSet ts = map_network(p, taox(), geom);
    set_permutation(ts.layers[2], [] {
      std::vector<int> perm = identity_permutation(128);
      std::swap(perm[0], perm[100]);
      return perm;
    }());
    std::string path = "/tmp/xbar_mapping_test_tiles.bin";
    save_tileset(path, ts);
    TileSet back = load_tileset(path);
    back.validate();
    CHECK(back.technology == ts.technology);
    CHECK(back.geometry == ts.geometry);
    REQUIRE(back.layers.size() == ts.layers.size());
    for (size_t l = 0; l < ts.layers.size(); ++l) {
      CHECK(back.layers[l].scale == ts.layers[l].scale);
      CHECK(back.layers[l].perm == ts.layers[l].perm);
      CHECK((back.layers[l].plus - ts.layers[l].plus).cwiseAbs().maxCoeff() == 0.0);
      CHECK((back.layers[l].minus - ts.layers[l].minus).cwiseAbs().maxCoeff() == 0.0);
    }
    {
      std::ofstream out(path, std::ios::binary);
      out << "garbage";
    }
    CHECK_THROWS_AS(load_tileset(path), ConfigError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_tileset(path), MissingArtifactError);
  }

  TEST_CASE("placement CSV lists every logical column") {
    NetworkParams p = init_network(desk_network_spec(), 37);
    TileSet ts = map_network(p, taox(), CrossbarGeometry{});
    std::ostringstream csv;
    write_placement_csv(csv, ts);
    std::string dump = csv.str();
    long lines = std::count(dump.begin(), dump.end(), '\n');
    CHECK(lines == 1 + 8 + 16 + 128 + 10);
    CHECK(dump.find("layer,logical_col,slot,block,col_in_block\n") == 0);
    CHECK(dump.find("3,9,9,0,9\n") != std::string::npos);  // fc2 last column, identity
  }

  TEST_CASE("validation catches inconsistent tilesets") {
    NetworkParams p = init_network(desk_network_spec(), 41);
    TileSet ts = map_network(p, taox(), CrossbarGeometry{});
    TileSet bad = ts;
    bad.layers[1].layer_index = 0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = ts;
    bad.layers[0].plus(0, 0) = 1.5;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = ts;
    bad.layers[0].perm[1] = bad.layers[0].perm[0];
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = ts;
    bad.technology.clear();
    CHECK_THROWS_AS(bad.validate(), ContractError);
  }
}
