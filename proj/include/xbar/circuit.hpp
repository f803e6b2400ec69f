#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <iosfwd>

#include "xbar/tech.hpp"

namespace xbar {

// Device conductances, rows x cols, siemens. Entry (i,j) sits at the
// crosspoint of BL i (horizontal, driven) and SL j (vertical, sensed).
using ConductanceGrid = Eigen::MatrixXd;
// BL drive voltages, volts, length rows.
using DriveVector = Eigen::VectorXd;
// SL output currents, amperes, length cols.
using ColumnCurrents = Eigen::VectorXd;

// I_j = sum_i v_i * G_ij  (no parasitics).
ColumnCurrents ideal_mvm(const DriveVector& v, const ConductanceGrid& g);

// Node-voltage system of the resistive mesh. Two node planes: BL(i,j) chained
// left-to-right with the driver v_i behind one wire segment at the left end of
// each row, SL(i,j) chained top-to-bottom with the bottom of each column tied
// to the 0V sense node through one wire segment. Each cell couples BL(i,j) to
// SL(i,j) through the device conductance in series with r_access.
// Symmetric positive definite; at most 5 entries per row.
struct NodalSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
  int rows = 0;
  int cols = 0;

  int unknowns() const { return 2 * rows * cols; }
  int bl_index(int i, int j) const { return i * cols + j; }
  int sl_index(int i, int j) const { return rows * cols + i * cols + j; }
};

// Requires r_line > 0 (with zero wire resistance there is no mesh to solve;
// solve_nonideal handles that limit in closed form).
NodalSystem build_network(const DriveVector& v, const ConductanceGrid& g,
                          const CrossbarGeometry& geom);

// Solved node voltages, for debugging and conservation checks.
struct NodeVoltages {
  Eigen::MatrixXd bl;  // rows x cols
  Eigen::MatrixXd sl;  // rows x cols
};

struct SolveStats {
  int sweeps = 0;          // block Gauss-Seidel sweeps taken (0 if closed form)
  double residual = 0.0;   // relative residual of the returned solution
  bool used_direct = false;
};

// Current into the 0V sense node at the foot of each column. The mesh is
// solved by alternating tridiagonal line sweeps (block Gauss-Seidel over the
// BL/SL planes), falling back to a direct sparse Cholesky factorization when
// the sweeps stall; either way the relative residual must meet 1e-9 or a
// NumericError is thrown. r_line == 0 reduces to the closed form
// I_j = sum_i v_i / (1/G_ij + r_access).
ColumnCurrents solve_nonideal(const DriveVector& v, const ConductanceGrid& g,
                              const CrossbarGeometry& geom,
                              SolveStats* stats = nullptr,
                              NodeVoltages* nodes = nullptr);

// Current delivered by each row driver, from the solved node voltages.
Eigen::VectorXd driver_currents(const DriveVector& v, const NodeVoltages& nodes,
                                const CrossbarGeometry& geom);

// CSV dump of node voltages: row,col,plane,volts with plane in {BL, SL}.
void write_node_voltages_csv(std::ostream& out, const NodeVoltages& nodes);

}  // namespace xbar
