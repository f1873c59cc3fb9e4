#include "bpdq/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bpdq/error.hpp"

namespace bpdq {

namespace {

constexpr std::size_t kMaxOracleGroup = 8;
constexpr double kMaxOracleAssignments = 16777216.0;  // 2^24

}  // namespace

GridTemplate::GridTemplate(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.size() < 2) {
    throw Error(ErrorKind::kPrecondition, "grid template needs at least two levels");
  }
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!std::isfinite(levels_[i])) {
      throw Error(ErrorKind::kPrecondition, "grid template levels must be finite");
    }
    if (i > 0 && !(levels_[i] > levels_[i - 1])) {
      throw Error(ErrorKind::kPrecondition, "grid template levels must be strictly increasing");
    }
  }
}

GridTemplate GridTemplate::uniform(int bits) {
  if (bits < 1 || bits > 16) throw Error(ErrorKind::kPrecondition, "uniform template bits");
  std::vector<double> levels(std::size_t{1} << bits);
  for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = static_cast<double>(i);
  return GridTemplate(std::move(levels));
}

std::vector<double> variable_levels(std::span<const double> c) {
  if (c.size() < 2 || c.size() > 9) {
    throw Error(ErrorKind::kPrecondition, "variable grid needs 1..8 plane coefficients");
  }
  const unsigned count = 1u << (c.size() - 1);
  std::vector<double> levels(count);
  for (unsigned n = 0; n < count; ++n) levels[n] = level_value(c, n);
  return levels;
}

std::vector<double> difference_ratio_set(const GridTemplate& t) {
  const auto lv = t.levels();
  std::vector<double> ratios;
  for (std::size_t i = 0; i < lv.size(); ++i)
    for (std::size_t j = 0; j < lv.size(); ++j)
      for (std::size_t k = 0; k < lv.size(); ++k) {
        if (i == j || i == k || j == k) continue;
        ratios.push_back((lv[i] - lv[j]) / (lv[i] - lv[k]));
      }
  std::sort(ratios.begin(), ratios.end());
  std::vector<double> unique;
  for (double r : ratios) {
    if (unique.empty() || std::abs(r - unique.back()) > 1e-9) unique.push_back(r);
  }
  return unique;
}

bool ratio_in_set(double ratio, std::span<const double> ratio_set, double tol) {
  return std::any_of(ratio_set.begin(), ratio_set.end(),
                     [&](double r) { return std::abs(r - ratio) <= tol; });
}

std::optional<FixedGridWitness> fixed_grid_membership(std::span<const double> v,
                                                      const GridTemplate& t) {
  const std::size_t g = v.size();
  const std::size_t m = t.size();
  if (g > kMaxOracleGroup || std::pow(static_cast<double>(m), static_cast<double>(g)) >
                                 kMaxOracleAssignments) {
    throw Error(ErrorKind::kOracleSize, "fixed-grid membership oracle limited to g <= 8 and "
                                        "2^24 assignments, got g=" + std::to_string(g));
  }
  if (g == 0) return FixedGridWitness{};

  double vmax = 0.0;
  double vmean = 0.0;
  for (double x : v) {
    vmax = std::max(vmax, std::abs(x));
    vmean += x;
  }
  vmean /= static_cast<double>(g);
  const double tol = 1e-9 * (1.0 + vmax);
  const auto lv = t.levels();

  // Odometer over assignments; coordinate 0 is the most significant digit.
  std::vector<std::size_t> z(g, 0);
  while (true) {
    double amean = 0.0;
    for (std::size_t i = 0; i < g; ++i) amean += lv[z[i]];
    amean /= static_cast<double>(g);
    double saa = 0.0;
    double sav = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
      const double da = lv[z[i]] - amean;
      saa += da * da;
      sav += da * (v[i] - vmean);
    }
    const double s = saa > 0.0 ? sav / saa : 0.0;
    const double c0 = vmean - s * amean;
    double worst = 0.0;
    for (std::size_t i = 0; i < g && worst <= tol; ++i) {
      worst = std::max(worst, std::abs(v[i] - (c0 + s * lv[z[i]])));
    }
    if (worst <= tol) return FixedGridWitness{c0, s, z};

    std::size_t pos = g;
    while (pos > 0) {
      --pos;
      if (++z[pos] < m) break;
      z[pos] = 0;
      if (pos == 0) return std::nullopt;
    }
  }
}

std::vector<double> construct_counterexample(const GridTemplate& t, std::size_t g, double c1,
                                             double c2) {
  if (g < 3) throw Error(ErrorKind::kPrecondition, "counterexample needs g >= 3");
  if (c1 == 0.0 || c2 == 0.0 || c1 == c2) {
    throw Error(ErrorKind::kPrecondition, "counterexample needs distinct nonzero c1, c2");
  }
  const auto ratios = difference_ratio_set(t);
  if (ratio_in_set(c1 / c2, ratios)) {
    throw Error(ErrorKind::kPrecondition, "c1/c2 = " + std::to_string(c1 / c2) +
                                              " lies in the template's difference-ratio set");
  }
  std::vector<double> v(g, 0.0);
  v[1] = c1;
  v[2] = c2;
  return v;
}

}  // namespace bpdq
