#include "theory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bpdq/bpd.hpp"
#include "bpdq/error.hpp"
#include "bpdq/grid.hpp"
#include "bpdq/linalg.hpp"
#include "bpdq/oracle.hpp"
#include "bpdq/solver.hpp"
#include "bpdq/tensorio.hpp"

namespace bpdq::app {

namespace {

constexpr std::size_t kMaxRecordedFailures = 5;

class Tally {
 public:
  explicit Tally(std::string name) { result_.name = std::move(name); }

  void check(bool ok, const std::string& what) {
    ++result_.total;
    if (ok) {
      ++result_.passed;
    } else if (result_.failures.size() < kMaxRecordedFailures) {
      result_.failures.push_back(what);
    }
  }

  SuiteResult take() { return std::move(result_); }

 private:
  SuiteResult result_;
};

Tensor2D normal_matrix(std::size_t rows, std::size_t cols, SeededNormal& rng) {
  Tensor2D t(rows, cols);
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

// Local factor of A A^T / 2g + 0.1 I with A of shape g x 2g.
Tensor2D random_local_factor(std::size_t g, SeededNormal& rng) {
  Tensor2D h = gram_rows(normal_matrix(g, 2 * g, rng));
  for (auto& v : h.values()) v /= static_cast<double>(2 * g);
  for (std::size_t i = 0; i < g; ++i) h(i, i) += 0.1;
  return inverse_cholesky_factor(h);
}

std::string describe(const char* what, std::uint64_t idx) {
  std::ostringstream os;
  os << what << " #" << idx;
  return os.str();
}

std::uint8_t last_tie_code(double value, std::span<const double> coeffs) {
  const unsigned count = 1u << (coeffs.size() - 1);
  std::uint8_t best = 0;
  double best_err = 0.0;
  for (unsigned n = 0; n < count; ++n) {
    const double d = value - level_value(coeffs, n);
    if (n == 0 || d * d <= best_err) {
      best = static_cast<std::uint8_t>(n);
      best_err = d * d;
    }
  }
  return best;
}

SuiteResult prop1(const TheoryOptions& opts) {
  Tally tally("prop1");
  const std::size_t g = opts.g.value_or(16);
  SeededNormal rng(opts.seed ^ 0x5031ULL);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Tensor2D snap = normal_matrix(8, g, rng);
    const Tensor2D u = random_local_factor(g, rng);
    const auto init = init_group(snap, u, 2, 0.0);
    const Tensor2D rtn = rtn_quantize_layer(snap, 2, g);
    const double init_err = squared_norm(init.e);
    const double rtn_err = squared_norm(solve_right_upper(snap - rtn, u));
    tally.check(init_err <= rtn_err + 1e-9, describe("init vs RTN2 group", i));
  }
  for (std::uint64_t i = 0; i < 20; ++i) {
    const double s = rng.normal();
    const std::vector<double> c{0.0, s, 2.0 * s};
    auto levels = variable_levels(c);
    std::vector<double> expect{0.0, s, 2.0 * s, 3.0 * s};
    std::sort(levels.begin(), levels.end());
    std::sort(expect.begin(), expect.end());
    tally.check(levels == expect, describe("uniform reproduction", i));
  }
  return tally.take();
}

SuiteResult prop2(const TheoryOptions& opts) {
  Tally tally("prop2");
  const GridTemplate t = GridTemplate::uniform(2);
  const auto ratios = difference_ratio_set(t);
  std::vector<std::size_t> sizes{3, 4, 5};
  if (opts.g) sizes = {*opts.g};
  SeededNormal rng(opts.seed ^ 0x5032ULL);
  for (std::size_t g : sizes) {
    int drawn = 0;
    while (drawn < 50) {
      const double c1 = rng.normal();
      const double c2 = rng.normal();
      if (c1 == 0.0 || c2 == 0.0 || c1 == c2 || ratio_in_set(c1 / c2, ratios)) continue;
      const auto v = construct_counterexample(t, g, c1, c2);
      tally.check(!fixed_grid_membership(v, t).has_value(), describe("counterexample", drawn));
      ++drawn;
    }
    for (int i = 0; i < 50; ++i) {
      const double s = rng.normal();
      std::vector<double> v(g, 0.0);
      v[1] = s;
      v[2] = 2.0 * s;
      tally.check(fixed_grid_membership(v, t).has_value(), describe("in-set construction", i));
    }
  }
  return tally.take();
}

SuiteResult wls_optimality(const TheoryOptions& opts) {
  Tally tally("b1");
  SeededNormal rng(opts.seed ^ 0xb1ULL);
  const std::size_t sizes[] = {8, 16, 32};
  for (std::uint64_t i = 0; i < 200; ++i) {
    const std::size_t g = opts.g.value_or(sizes[i % 3]);
    const int k = 1 + static_cast<int>(i % 3);
    if (g < (1u << k)) continue;
    const Tensor2D u = random_local_factor(g, rng);
    std::vector<std::uint8_t> codes(g);
    for (std::size_t j = 0; j < g; ++j) codes[j] = static_cast<std::uint8_t>(j % (1u << k));
    for (std::size_t j = g; j-- > 1;) {
      std::swap(codes[j], codes[static_cast<std::size_t>(rng.uniform() * static_cast<double>(j + 1))]);
    }
    const Tensor2D design = make_design(codes, k);
    std::vector<double> target(g);
    for (auto& v : target) v = rng.normal();

    const auto c = wls_fit(design, target, u, 0.0);
    const auto ref = oracle::dense_wls(design, target, u, 0.0);
    double gap = 0.0;
    for (std::size_t a = 0; a < c.size(); ++a) {
      gap = std::max(gap, std::abs(c[a] - ref[a]) / std::max(1.0, std::abs(ref[a])));
    }

    const Tensor2D d = solve_upper_transpose(u, design);
    Tensor2D tcol(g, 1);
    for (std::size_t j = 0; j < g; ++j) tcol(j, 0) = target[j];
    const Tensor2D tw = solve_upper_transpose(u, tcol);
    double residual = 0.0;
    for (std::size_t a = 0; a < c.size(); ++a) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g; ++j) {
        double r = -tw(j, 0);
        for (std::size_t b = 0; b < c.size(); ++b) r += d(j, b) * c[b];
        acc += d(j, a) * r;
      }
      residual += acc * acc;
    }

    const double base = wls_objective(design, target, u, 0.0, c);
    bool dominated = true;
    std::vector<double> p(c.size());
    for (int trial = 0; trial < 100; ++trial) {
      double norm = 0.0;
      for (auto& v : p) {
        v = rng.normal();
        norm += v * v;
      }
      for (std::size_t a = 0; a < p.size(); ++a) p[a] = c[a] + 1e-3 * p[a] / std::sqrt(norm);
      dominated = dominated && base <= wls_objective(design, target, u, 0.0, p);
    }
    tally.check(std::sqrt(residual) <= 1e-8 && gap <= 1e-10 && dominated, describe("fit", i));
  }
  return tally.take();
}

SuiteResult column_optimality(const TheoryOptions& opts) {
  Tally tally("b2");
  SeededNormal rng(opts.seed ^ 0xb2ULL);
  auto choose = [&](double value, std::span<const double> c) {
    return opts.flip_tie_rule ? last_tie_code(value, c) : nearest_code(value, c);
  };
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const int k = 1 + static_cast<int>(i % 3);
    std::vector<double> c(static_cast<std::size_t>(k) + 1);
    for (auto& v : c) v = rng.normal();
    const double value = 2.0 * rng.normal();
    const auto ref = oracle::reference_column_argmin(value, c);
    const std::uint8_t code = choose(value, c);
    const double err = (value - level_value(c, code)) * (value - level_value(c, code));
    tally.check(code == ref.code && err == (value - ref.q) * (value - ref.q),
                describe("random column", i));
  }
  // Exact ties on the grid {0, 1, 2, 3} and on a degenerate plane.
  const std::vector<double> uniform{0.0, 1.0, 2.0};
  const std::vector<double> degenerate{0.5, 0.0, 1.0};
  for (double value : {0.5, 1.5, 2.5}) {
    tally.check(choose(value, uniform) == oracle::reference_column_argmin(value, uniform).code,
                "tie at " + std::to_string(value));
  }
  for (double value : {0.5, 1.5, 1.0}) {
    tally.check(choose(value, degenerate) == oracle::reference_column_argmin(value, degenerate).code,
                "degenerate tie at " + std::to_string(value));
  }
  return tally.take();
}

SuiteResult delta_consistency(const TheoryOptions& opts) {
  Tally tally("b3");
  const std::size_t g = opts.g.value_or(16);
  SeededNormal rng(opts.seed ^ 0xb3ULL);
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Tensor2D snap = normal_matrix(8, g, rng);
    const Tensor2D u = random_local_factor(g, rng);
    auto init = init_group(snap, u, 2, 1e-4);
    GroupState state{snap, std::move(init.planes), std::move(init.coeffs), std::move(init.q),
                     std::move(init.e), 0.0};
    bool ok = true;
    for (int round = 0; round < 3; ++round) {
      state = refit_and_correct(bit_plane_pass(state, u), u, 1e-4);
      const Tensor2D fresh = solve_right_upper(snap - state.q, u);
      ok = ok && frobenius_norm(state.e - fresh) <= 1e-10 * std::max(1.0, frobenius_norm(fresh));
    }
    tally.check(ok, describe("group", i));
  }
  return tally.take();
}

}  // namespace

const std::vector<std::string>& theory_suite_names() {
  static const std::vector<std::string> names{"prop1", "prop2", "b1", "b2", "b3"};
  return names;
}

SuiteResult run_theory_suite(const std::string& name, const TheoryOptions& opts) {
  if (name == "prop1") return prop1(opts);
  if (name == "prop2") return prop2(opts);
  if (name == "b1") return wls_optimality(opts);
  if (name == "b2") return column_optimality(opts);
  if (name == "b3") return delta_consistency(opts);
  throw Error(ErrorKind::kConfig, "unknown suite '" + name + "' (expected prop1, prop2, b1, b2, b3 or all)");
}

}  // namespace bpdq::app
