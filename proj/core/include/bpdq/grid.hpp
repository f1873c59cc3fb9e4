#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace bpdq {

/// Shape-invariant fixed grid: levels c0 + s * t_i. Levels are strictly
/// increasing with at least two entries.
class GridTemplate {
 public:
  explicit GridTemplate(std::vector<double> levels);

  /// {0, 1, ..., 2^bits - 1}, the UINT-b template.
  static GridTemplate uniform(int bits);

  std::span<const double> levels() const noexcept { return levels_; }
  std::size_t size() const noexcept { return levels_.size(); }

 private:
  std::vector<double> levels_;
};

/// Candidate value of code n under coefficients c = (c0, c1..ck):
/// c0 + sum_i c_i * bit_{i-1}(n). Every component that reconstructs weights
/// from codes goes through this so the summation order is shared.
inline double level_value(std::span<const double> c, unsigned code) noexcept {
  double v = c[0];
  for (std::size_t i = 1; i < c.size(); ++i) {
    if ((code >> (i - 1)) & 1u) v += c[i];
  }
  return v;
}

/// All 2^k candidates, indexed by code; neither sorted nor deduplicated.
std::vector<double> variable_levels(std::span<const double> c);

/// {(t_i - t_j) / (t_i - t_k)} over ordered triples of distinct levels,
/// sorted and deduplicated at 1e-9.
std::vector<double> difference_ratio_set(const GridTemplate& t);

bool ratio_in_set(double ratio, std::span<const double> ratio_set, double tol = 1e-9);

struct FixedGridWitness {
  double c0 = 0.0;
  double s = 0.0;
  std::vector<std::size_t> assignment;  // template index per coordinate
};

/// Exhaustive test of v in {c0 * 1 + s * t[z]}. Every assignment z is tried
/// with its least-squares (c0, s); a witness is returned when the max
/// residual is within 1e-9 * (1 + max|v|). Throws Error(kOracleSize) for g > 8.
std::optional<FixedGridWitness> fixed_grid_membership(std::span<const double> v,
                                                      const GridTemplate& t);

/// v = (0, c1, c2, 0, ..., 0) of length g: realizable with two bit-planes but
/// outside every scaled copy of t whenever c1/c2 avoids the ratio set.
std::vector<double> construct_counterexample(const GridTemplate& t, std::size_t g, double c1,
                                             double c2);

}  // namespace bpdq
