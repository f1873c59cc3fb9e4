#pragma once

// Brute-force references for tests and the theory-check command. Nothing in
// the production solve path links against these.

#include <cstdint>
#include <span>
#include <vector>

#include "bpdq/tensor.hpp"

namespace bpdq::oracle {

struct ColumnArgmin {
  unsigned code = 0;
  double q = 0.0;
};

/// Scans codes 0..2^k-1 in order with a strict less-than, so the first
/// minimum wins.
ColumnArgmin reference_column_argmin(double value, std::span<const double> coeffs);

struct GroupOptimum {
  std::vector<unsigned> assignment;
  double error = 0.0;  // ||U_loc^-T (v(assignment) - w_row)||^2
};

/// Exact minimizer of the group's metric error over all (2^k)^g code
/// assignments for fixed coefficients. Throws Error(kOracleSize) past 2^20.
GroupOptimum brute_force_group_optimum(std::span<const double> w_row,
                                       std::span<const double> coeffs, const Tensor2D& u_loc);

/// Same fit as wls_fit, solved through explicit dense inverses of U_loc and
/// of the damped Gram matrix. Throws Error(kSingular) on a singular Gram.
std::vector<double> dense_wls(const Tensor2D& design, std::span<const double> target,
                              const Tensor2D& u_loc, double alpha);

/// ||U_loc^-T r||^2 through a dense inverse.
double metric_error(std::span<const double> residual, const Tensor2D& u_loc);

}  // namespace bpdq::oracle
