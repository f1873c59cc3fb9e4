#include "bpdq/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bpdq/error.hpp"

namespace bpdq {

namespace {

// Pivots at or below this fraction of the largest diagonal entry are treated
// as zero; exact rank deficiency otherwise leaks through as rounding noise.
constexpr double kPivotTolerance = 1e-12;

void require_square(const Tensor2D& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::kDimension, std::string(what) + " must be square");
  }
}

void require_nonzero_diagonal(const Tensor2D& u) {
  for (std::size_t i = 0; i < u.rows(); ++i) {
    if (u(i, i) == 0.0 || !std::isfinite(u(i, i))) {
      throw Error(ErrorKind::kSingular,
                  "triangular factor has zero diagonal at index " + std::to_string(i));
    }
  }
}

// Inverse of a lower-triangular matrix by column-wise forward substitution.
Tensor2D invert_lower(const Tensor2D& l) {
  const std::size_t n = l.rows();
  Tensor2D inv(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    inv(c, c) = 1.0 / l(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t j = c; j < r; ++j) acc += l(r, j) * inv(j, c);
      inv(r, c) = -acc / l(r, r);
    }
  }
  return inv;
}

}  // namespace

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::kDimension, "matmul inner dimensions differ: " +
                                           std::to_string(a.cols()) + " vs " +
                                           std::to_string(b.rows()));
  }
  Tensor2D out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      const auto brow = b.row(p);
      for (std::size_t j = 0; j < brow.size(); ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

Tensor2D gram_rows(const Tensor2D& x) {
  const std::size_t d = x.rows();
  Tensor2D h(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto xi = x.row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      const auto xj = x.row(j);
      double acc = 0.0;
      for (std::size_t t = 0; t < xi.size(); ++t) acc += xi[t] * xj[t];
      h(i, j) = acc;
      h(j, i) = acc;
    }
  }
  return h;
}

Tensor2D cholesky_lower(const Tensor2D& h) {
  require_square(h, "Cholesky input");
  const std::size_t n = h.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(h(i, i)));
  const double floor = kPivotTolerance * max_diag;

  Tensor2D l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = h(j, j);
    for (std::size_t p = 0; p < j; ++p) pivot -= l(j, p) * l(j, p);
    if (!(pivot > floor) || !std::isfinite(pivot)) {
      throw Error(ErrorKind::kSingular, "matrix is not positive definite (pivot " +
                                            std::to_string(j) + " = " + std::to_string(pivot) +
                                            ")");
    }
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = h(i, j);
      for (std::size_t p = 0; p < j; ++p) acc -= l(i, p) * l(j, p);
      l(i, j) = acc / d;
    }
  }
  return l;
}

HessianState hessian_from_activations(const Tensor2D& x, double percdamp) {
  if (x.rows() == 0 || x.cols() == 0) {
    throw Error(ErrorKind::kDimension, "activations must have at least one channel and sample");
  }
  HessianState state;
  state.h = gram_rows(x);
  const std::size_t d = state.h.rows();
  double diag_sum = 0.0;
  for (std::size_t i = 0; i < d; ++i) diag_sum += state.h(i, i);
  state.damp_lambda = percdamp * diag_sum / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) state.h(i, i) += state.damp_lambda;
  try {
    state.u = inverse_cholesky_factor(state.h);
  } catch (const Error& e) {
    throw Error(ErrorKind::kSingular, "singular Hessian: " + e.message());
  }
  return state;
}

Tensor2D inverse_cholesky_factor(const Tensor2D& h) {
  const Tensor2D l = cholesky_lower(h);
  const Tensor2D l_inv = invert_lower(l);
  const std::size_t n = h.rows();

  // H^-1 = L^-T L^-1; only the lower triangle is accumulated, then mirrored.
  Tensor2D h_inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t p = i; p < n; ++p) acc += l_inv(p, i) * l_inv(p, j);
      h_inv(i, j) = acc;
      h_inv(j, i) = acc;
    }
  }
  return cholesky_lower(h_inv).transpose();
}

Tensor2D solve_upper_transpose(const Tensor2D& u_loc, const Tensor2D& rhs) {
  require_square(u_loc, "U_loc");
  if (rhs.rows() != u_loc.rows()) {
    throw Error(ErrorKind::kDimension, "rhs rows must match U_loc");
  }
  require_nonzero_diagonal(u_loc);
  const std::size_t g = u_loc.rows();
  const std::size_t m = rhs.cols();
  Tensor2D y = rhs;
  // U^T is lower triangular with (U^T)(i, j) = U(j, i).
  for (std::size_t i = 0; i < g; ++i) {
    auto yi = y.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      const double uji = u_loc(j, i);
      if (uji == 0.0) continue;
      const auto yj = y.row(j);
      for (std::size_t c = 0; c < m; ++c) yi[c] -= uji * yj[c];
    }
    const double inv = 1.0 / u_loc(i, i);
    for (std::size_t c = 0; c < m; ++c) yi[c] *= inv;
  }
  return y;
}

Tensor2D solve_right_upper(const Tensor2D& m, const Tensor2D& u_loc) {
  require_square(u_loc, "U_loc");
  if (m.cols() != u_loc.rows()) {
    throw Error(ErrorKind::kDimension, "m columns must match U_loc");
  }
  require_nonzero_diagonal(u_loc);
  const std::size_t g = u_loc.rows();
  Tensor2D x(m.rows(), g);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto mr = m.row(r);
    auto xr = x.row(r);
    for (std::size_t j = 0; j < g; ++j) {
      double acc = mr[j];
      for (std::size_t i = 0; i < j; ++i) acc -= xr[i] * u_loc(i, j);
      xr[j] = acc / u_loc(j, j);
    }
  }
  return x;
}

Tensor2D make_design(std::span<const std::uint8_t> codes, int k) {
  Tensor2D d(codes.size(), static_cast<std::size_t>(k) + 1);
  for (std::size_t j = 0; j < codes.size(); ++j) {
    d(j, 0) = 1.0;
    for (int i = 1; i <= k; ++i) d(j, static_cast<std::size_t>(i)) = (codes[j] >> (i - 1)) & 1u;
  }
  return d;
}

std::vector<double> wls_fit(const Tensor2D& design, std::span<const double> target,
                            const Tensor2D& u_loc, double alpha) {
  const std::size_t g = design.rows();
  const std::size_t p = design.cols();
  if (target.size() != g || u_loc.rows() != g) {
    throw Error(ErrorKind::kDimension, "wls_fit: design, target and U_loc sizes disagree");
  }
  if (alpha < 0.0) throw Error(ErrorKind::kPrecondition, "wls_fit: alpha must be >= 0");

  // Whiten design and target together: [D | t~] = U_loc^-T [design | target].
  Tensor2D stacked(g, p + 1);
  for (std::size_t j = 0; j < g; ++j) {
    for (std::size_t c = 0; c < p; ++c) stacked(j, c) = design(j, c);
    stacked(j, p) = target[j];
  }
  const Tensor2D white = solve_upper_transpose(u_loc, stacked);

  Tensor2D gram(p, p);
  std::vector<double> rhs(p, 0.0);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g; ++j) acc += white(j, a) * white(j, b);
      gram(a, b) = acc;
      gram(b, a) = acc;
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < g; ++j) acc += white(j, a) * white(j, p);
    rhs[a] = acc;
    gram(a, a) += alpha;
  }

  Tensor2D l;
  try {
    l = cholesky_lower(gram);
  } catch (const Error&) {
    throw Error(ErrorKind::kSingular, "wls_fit: normal equations are singular (alpha=" +
                                          std::to_string(alpha) + ")");
  }
  // L L^T c = rhs.
  std::vector<double> y(p);
  for (std::size_t i = 0; i < p; ++i) {
    double acc = rhs[i];
    for (std::size_t j = 0; j < i; ++j) acc -= l(i, j) * y[j];
    y[i] = acc / l(i, i);
  }
  std::vector<double> c(p);
  for (std::size_t i = p; i-- > 0;) {
    double acc = y[i];
    for (std::size_t j = i + 1; j < p; ++j) acc -= l(j, i) * c[j];
    c[i] = acc / l(i, i);
  }
  return c;
}

double wls_objective(const Tensor2D& design, std::span<const double> target,
                     const Tensor2D& u_loc, double alpha, std::span<const double> c) {
  const std::size_t g = design.rows();
  Tensor2D residual(g, 1);
  for (std::size_t j = 0; j < g; ++j) {
    double v = -target[j];
    for (std::size_t a = 0; a < design.cols(); ++a) v += design(j, a) * c[a];
    residual(j, 0) = v;
  }
  double obj = squared_norm(solve_upper_transpose(u_loc, residual));
  for (double ci : c) obj += alpha * ci * ci;
  return obj;
}

}  // namespace bpdq
