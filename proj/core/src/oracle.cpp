#include "bpdq/oracle.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "bpdq/error.hpp"

namespace bpdq::oracle {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix to_eigen(const Tensor2D& t) {
  Matrix m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t(r, c);
  return m;
}

// Dense U^-T, built from a full inverse rather than a triangular solve.
Matrix inverse_transpose(const Tensor2D& u_loc) {
  const Matrix u = to_eigen(u_loc);
  const Eigen::FullPivLU<Matrix> lu(u);
  if (!lu.isInvertible()) throw Error(ErrorKind::kSingular, "oracle: U_loc is singular");
  return lu.inverse().transpose();
}

double candidate(std::span<const double> c, unsigned code) {
  double v = c[0];
  for (std::size_t i = 1; i < c.size(); ++i) {
    if ((code >> (i - 1)) & 1u) v += c[i];
  }
  return v;
}

}  // namespace

ColumnArgmin reference_column_argmin(double value, std::span<const double> coeffs) {
  const unsigned count = 1u << (coeffs.size() - 1);
  ColumnArgmin best{0, candidate(coeffs, 0)};
  double best_err = (value - best.q) * (value - best.q);
  for (unsigned code = 1; code < count; ++code) {
    const double v = candidate(coeffs, code);
    const double err = (value - v) * (value - v);
    if (err < best_err) {
      best = {code, v};
      best_err = err;
    }
  }
  return best;
}

double metric_error(std::span<const double> residual, const Tensor2D& u_loc) {
  const Matrix l = inverse_transpose(u_loc);
  const Eigen::Map<const Eigen::VectorXd> r(residual.data(), static_cast<Eigen::Index>(residual.size()));
  return (l * r).squaredNorm();
}

GroupOptimum brute_force_group_optimum(std::span<const double> w_row,
                                       std::span<const double> coeffs, const Tensor2D& u_loc) {
  const std::size_t g = w_row.size();
  const int k = static_cast<int>(coeffs.size()) - 1;
  if (k < 1 || static_cast<double>(k) * static_cast<double>(g) > 20.0) {
    throw Error(ErrorKind::kOracleSize, "brute-force group oracle limited to (2^k)^g <= 2^20, got k=" +
                                            std::to_string(k) + " g=" + std::to_string(g));
  }
  const Matrix l = inverse_transpose(u_loc);
  const unsigned levels = 1u << k;
  const std::uint64_t total = std::uint64_t{1} << (static_cast<unsigned>(k) * g);

  GroupOptimum best;
  best.error = std::numeric_limits<double>::infinity();
  std::vector<unsigned> assignment(g, 0);
  Eigen::VectorXd residual(static_cast<Eigen::Index>(g));
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    std::uint64_t rest = idx;
    for (std::size_t j = 0; j < g; ++j) {
      assignment[j] = static_cast<unsigned>(rest % levels);
      rest /= levels;
      residual(static_cast<Eigen::Index>(j)) = candidate(coeffs, assignment[j]) - w_row[j];
    }
    const double err = (l * residual).squaredNorm();
    if (err < best.error) {
      best.error = err;
      best.assignment = assignment;
    }
  }
  return best;
}

std::vector<double> dense_wls(const Tensor2D& design, std::span<const double> target,
                              const Tensor2D& u_loc, double alpha) {
  const Matrix l = inverse_transpose(u_loc);
  const Matrix d = l * to_eigen(design);
  const Eigen::Map<const Eigen::VectorXd> t(target.data(), static_cast<Eigen::Index>(target.size()));
  const Eigen::VectorXd tw = l * t;
  Matrix gram = d.transpose() * d;
  gram.diagonal().array() += alpha;
  const Eigen::FullPivLU<Matrix> lu(gram);
  if (!lu.isInvertible()) throw Error(ErrorKind::kSingular, "oracle: Gram matrix is singular");
  const Eigen::VectorXd c = lu.inverse() * (d.transpose() * tw);
  return {c.data(), c.data() + c.size()};
}

}  // namespace bpdq::oracle
