#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bpdq/tensor.hpp"

namespace bpdq {

/// Damped Hessian H = XX^T + lambda*I together with the upper-triangular
/// factor U of its inverse (H^-1 = U^T U).
struct HessianState {
  Tensor2D h;
  Tensor2D u;
  double damp_lambda = 0.0;
};

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);

/// X X^T for X of shape d x n.
Tensor2D gram_rows(const Tensor2D& x);

/// Lower Cholesky factor L with h = L L^T. Throws Error(kSingular) when a
/// pivot is not positive (relative to the largest diagonal entry).
Tensor2D cholesky_lower(const Tensor2D& h);

/// lambda = percdamp * mean(diag(XX^T)). Throws Error(kSingular) if the
/// damped Hessian is not positive definite.
HessianState hessian_from_activations(const Tensor2D& x, double percdamp);

/// Upper-triangular U with positive diagonal such that h^-1 = U^T U.
Tensor2D inverse_cholesky_factor(const Tensor2D& h);

/// Solves U^T Y = rhs by forward substitution; U is g x g upper, rhs g x m.
Tensor2D solve_upper_transpose(const Tensor2D& u_loc, const Tensor2D& rhs);

/// Solves X U = m for X, where U is g x g upper and m is r x g.
Tensor2D solve_right_upper(const Tensor2D& m, const Tensor2D& u_loc);

/// Binary design matrix of a row fit: column 0 is the bias (all ones),
/// column i (1..k) is bit-plane i of the row segment.
Tensor2D make_design(std::span<const std::uint8_t> codes, int k);

/// Ridge-regularized weighted least squares in the U_loc^-T metric:
///   argmin_c ||U_loc^-T (design c - target)||^2 + alpha ||c||^2.
/// With alpha = 0 and a rank-deficient design, throws Error(kSingular).
std::vector<double> wls_fit(const Tensor2D& design, std::span<const double> target,
                            const Tensor2D& u_loc, double alpha);

/// Value of the objective minimized by wls_fit at c.
double wls_objective(const Tensor2D& design, std::span<const double> target,
                     const Tensor2D& u_loc, double alpha, std::span<const double> c);

}  // namespace bpdq
