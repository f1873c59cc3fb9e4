#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bpdq/bpd.hpp"
#include "bpdq/config.hpp"
#include "bpdq/kernel.hpp"
#include "bpdq/linalg.hpp"
#include "bpdq/tensor.hpp"

namespace bpdq {

/// One candidate for a group. The working weights at group entry (snapshot)
/// never change while the group is solved, and every state satisfies
///   snapshot - q = e * U_loc.
struct GroupState {
  Tensor2D snapshot;
  GroupPlanes planes;
  Tensor2D coeffs;  // d_out x (k+1)
  Tensor2D q;
  Tensor2D e;
  double score = 0.0;  // ||e||_F^2
};

struct GroupSolution {
  GroupState best;
  double init_score = 0.0;
  std::vector<double> score_trace;  // init score, then one entry per round
  int best_iteration = 0;           // 0 = initialization
};

struct ObjectiveValue {
  double frob = 0.0;   // ||(W - W^) X||_F^2
  double trace = 0.0;  // tr((W - W^) X X^T (W - W^)^T)
};

struct SolveReport {
  double objective_frob = 0.0;   // ||E||_F^2, i.e. ||(W - W^) U^-1||_F^2
  double objective_trace = 0.0;  // tr((W - W^) H (W - W^)^T) with the damped H
  std::vector<double> per_group_scores;
  std::vector<double> per_group_init_scores;
  int iterations_used = 0;
  double wall_time = 0.0;  // seconds
};

struct LayerSolution {
  QuantizedLayer layer;  // coefficients rounded to cfg.coeff_bits
  Tensor2D q;            // solver's W^ at full precision
  Tensor2D e;            // error coordinates, W - W^ = E U
  Tensor2D entry;        // working weights of each group at its entry
  SolveReport report;
};

struct BaselineResult {
  Tensor2D q;
  SolveReport report;
};

ObjectiveValue objective(const Tensor2D& w, const Tensor2D& q, const Tensor2D& x);

/// tr(D H D^T) for D = w - q.
double hessian_objective(const Tensor2D& w, const Tensor2D& q, const Tensor2D& h);

struct ColumnChoice {
  std::vector<std::uint8_t> codes;  // bit i-1 of codes[r] is b_i
  std::vector<double> q;
};

/// Code minimizing (value - v(code))^2 over all 2^k candidates; the first
/// (lowest) code wins ties.
std::uint8_t nearest_code(double value, std::span<const double> coeffs) noexcept;

/// Row-wise nearest candidate for one column.
ColumnChoice quantize_column(std::span<const double> values, const Tensor2D& coeffs);

/// working[:, first_col + j] -= e_col * u_row_segment[j].
void propagate_column(Tensor2D& working, std::size_t first_col, std::span<const double> e_col,
                      std::span<const double> u_row_segment);

/// Refits coefficients against the snapshot with the planes fixed, then
/// applies dE = (q_old - q_new) U_loc^-1 so the state identity still holds.
GroupState refit_and_correct(const GroupState& state, const Tensor2D& u_loc, double alpha);

/// One bit-plane pass: quantize columns left to right on a fresh copy of the
/// snapshot, propagating each column's error inside the group.
GroupState bit_plane_pass(const GroupState& state, const Tensor2D& u_loc);

/// Initialization followed by cfg.iters rounds of bit-plane pass + refit;
/// returns the lowest-score candidate.
GroupSolution solve_group(const Tensor2D& snapshot, const Tensor2D& u_loc, const RunConfig& cfg);

LayerSolution bpdq_quantize_layer(const Tensor2D& w, const HessianState& hstate,
                                  const RunConfig& cfg);

/// GPTQ-style fixed-grid baseline: per-(row, group) affine UINT-bits grid
/// frozen from the working weights at group entry, error propagated to every
/// later column.
BaselineResult gptq_quantize_layer(const Tensor2D& w, const HessianState& hstate, int bits,
                                   std::size_t g);

/// Per-(row, group) affine round-to-nearest at 2^bits levels.
Tensor2D rtn_quantize_layer(const Tensor2D& w, int bits, std::size_t g);

}  // namespace bpdq
