#include "bpdq/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "bpdq/error.hpp"
#include "bpdq/grid.hpp"

namespace bpdq {

namespace {

// Affine min/max grid over one row segment with maxq + 1 levels.
struct AffineRow {
  double wmin = 0.0;
  double range = 0.0;
  double scale = 1.0;
  double maxq = 0.0;

  AffineRow(std::span<const double> seg, int bits) : maxq(std::ldexp(1.0, bits) - 1.0) {
    const auto [lo, hi] = std::minmax_element(seg.begin(), seg.end());
    wmin = *lo;
    range = *hi - *lo;
    scale = range > 0.0 ? range / maxq : 1.0;
  }

  double reconstruct(double w) const noexcept {
    const double t = range > 0.0 ? (w - wmin) / range * maxq : 0.0;
    return wmin + std::clamp(std::round(t), 0.0, maxq) * scale;
  }
};

void require_bits(int bits) {
  if (bits < 2 || bits > 8) {
    throw Error(ErrorKind::kConfig, "baseline bit width must be in 2..8, got " + std::to_string(bits));
  }
}

void require_groups(const Tensor2D& w, std::size_t g) {
  if (g == 0 || w.cols() % g != 0) {
    throw Error(ErrorKind::kConfig, "group size g=" + std::to_string(g) +
                                        " does not divide d_in=" + std::to_string(w.cols()));
  }
}

void require_hessian(const Tensor2D& w, const HessianState& hstate) {
  if (hstate.u.rows() != w.cols() || hstate.u.cols() != w.cols() || hstate.h.rows() != w.cols()) {
    throw Error(ErrorKind::kDimension, "Hessian is " + std::to_string(hstate.u.rows()) + "x" +
                                           std::to_string(hstate.u.cols()) + ", weights have d_in=" +
                                           std::to_string(w.cols()));
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

ObjectiveValue objective(const Tensor2D& w, const Tensor2D& q, const Tensor2D& x) {
  const Tensor2D diff = w - q;
  return {squared_norm(matmul(diff, x)), hessian_objective(w, q, gram_rows(x))};
}

double hessian_objective(const Tensor2D& w, const Tensor2D& q, const Tensor2D& h) {
  const Tensor2D diff = w - q;
  if (h.rows() != diff.cols() || h.cols() != diff.cols()) {
    throw Error(ErrorKind::kDimension, "hessian_objective: H does not match d_in");
  }
  const Tensor2D dh = matmul(diff, h);
  double acc = 0.0;
  for (std::size_t r = 0; r < diff.rows(); ++r) {
    const auto a = diff.row(r);
    const auto b = dh.row(r);
    for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  }
  return acc;
}

std::uint8_t nearest_code(double value, std::span<const double> coeffs) noexcept {
  const unsigned count = 1u << (coeffs.size() - 1);
  std::uint8_t best = 0;
  double best_err = 0.0;
  for (unsigned n = 0; n < count; ++n) {
    const double d = value - level_value(coeffs, n);
    const double err = d * d;
    if (n == 0 || err < best_err) {
      best = static_cast<std::uint8_t>(n);
      best_err = err;
    }
  }
  return best;
}

ColumnChoice quantize_column(std::span<const double> values, const Tensor2D& coeffs) {
  if (values.size() != coeffs.rows()) {
    throw Error(ErrorKind::kDimension, "quantize_column: one coefficient row per value");
  }
  if (coeffs.cols() < 2 || coeffs.cols() > 9) {
    throw Error(ErrorKind::kPrecondition, "quantize_column: k must be in 1..8");
  }
  ColumnChoice out{std::vector<std::uint8_t>(values.size()), std::vector<double>(values.size())};
  for (std::size_t r = 0; r < values.size(); ++r) {
    const auto c = coeffs.row(r);
    out.codes[r] = nearest_code(values[r], c);
    out.q[r] = level_value(c, out.codes[r]);
  }
  return out;
}

void propagate_column(Tensor2D& working, std::size_t first_col, std::span<const double> e_col,
                      std::span<const double> u_row_segment) {
  if (e_col.size() != working.rows() || first_col + u_row_segment.size() > working.cols()) {
    throw Error(ErrorKind::kDimension, "propagate_column: segment does not fit working block");
  }
  for (std::size_t r = 0; r < working.rows(); ++r) {
    const double e = e_col[r];
    if (e == 0.0) continue;
    auto row = working.row(r).subspan(first_col, u_row_segment.size());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] -= e * u_row_segment[j];
  }
}

GroupState bit_plane_pass(const GroupState& state, const Tensor2D& u_loc) {
  const std::size_t rows = state.snapshot.rows();
  const std::size_t g = state.snapshot.cols();
  GroupState next;
  next.snapshot = state.snapshot;
  next.coeffs = state.coeffs;
  next.planes = GroupPlanes(rows, g, state.planes.k());
  next.q = Tensor2D(rows, g);
  next.e = Tensor2D(rows, g);

  Tensor2D working = state.snapshot;
  std::vector<double> e_col(rows);
  for (std::size_t l = 0; l < g; ++l) {
    const auto choice = quantize_column(working.column(l), state.coeffs);
    const double diag = u_loc(l, l);
    for (std::size_t r = 0; r < rows; ++r) {
      next.planes.set_code(r, l, choice.codes[r]);
      next.q(r, l) = choice.q[r];
      e_col[r] = (working(r, l) - choice.q[r]) / diag;
      next.e(r, l) = e_col[r];
    }
    if (l + 1 < g) propagate_column(working, l + 1, e_col, u_loc.row(l).subspan(l + 1));
  }
  next.score = squared_norm(next.e);
  return next;
}

GroupState refit_and_correct(const GroupState& state, const Tensor2D& u_loc, double alpha) {
  const int k = state.planes.k();
  GroupState next = state;
  for (std::size_t r = 0; r < state.snapshot.rows(); ++r) {
    const auto c = wls_fit(make_design(state.planes.row_codes(r), k), state.snapshot.row(r), u_loc,
                           alpha);
    std::copy(c.begin(), c.end(), next.coeffs.row(r).begin());
  }
  next.q = reconstruct_group(state.planes, next.coeffs);
  const Tensor2D delta = solve_right_upper(state.q - next.q, u_loc);
  next.e = state.e + delta;
  next.score = squared_norm(next.e);
  return next;
}

GroupSolution solve_group(const Tensor2D& snapshot, const Tensor2D& u_loc, const RunConfig& cfg) {
  if (cfg.k < 1 || cfg.k > 8) throw Error(ErrorKind::kConfig, "k must be in 1..8");
  if (cfg.iters < 0) throw Error(ErrorKind::kConfig, "iters must be >= 0");
  auto init = init_group(snapshot, u_loc, cfg.k, cfg.alpha);

  GroupState current{snapshot, std::move(init.planes), std::move(init.coeffs), std::move(init.q),
                     std::move(init.e), 0.0};
  current.score = squared_norm(current.e);

  GroupSolution sol;
  sol.init_score = current.score;
  sol.score_trace.push_back(current.score);
  sol.best = current;
  for (int it = 1; it <= cfg.iters && sol.best.score > 0.0; ++it) {
    current = refit_and_correct(bit_plane_pass(current, u_loc), u_loc, cfg.alpha);
    sol.score_trace.push_back(current.score);
    if (current.score < sol.best.score) {
      sol.best = current;
      sol.best_iteration = it;
    }
  }
  return sol;
}

LayerSolution bpdq_quantize_layer(const Tensor2D& w, const HessianState& hstate,
                                  const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate(w.cols());
  require_hessian(w, hstate);
  const std::size_t d_out = w.rows();
  const std::size_t d_in = w.cols();
  const std::size_t g = cfg.g;

  LayerSolution out;
  out.layer = QuantizedLayer::zeros(d_out, d_in, g, cfg.k, coeff_dtype_for_bits(cfg.coeff_bits));
  out.q = Tensor2D(d_out, d_in);
  out.e = Tensor2D(d_out, d_in);
  out.entry = Tensor2D(d_out, d_in);

  Tensor2D working = w;
  for (std::size_t grp = 0; grp < d_in / g; ++grp) {
    const std::size_t s = grp * g;
    const Tensor2D snapshot = working.block(0, s, d_out, g);
    const Tensor2D u_loc = hstate.u.block(s, s, g, g);
    const GroupSolution sol = solve_group(snapshot, u_loc, cfg);
    const GroupState& best = sol.best;

    out.entry.set_block(0, s, snapshot);
    out.q.set_block(0, s, best.q);
    out.e.set_block(0, s, best.e);
    out.layer.set_group(grp, best.planes, best.coeffs);
    out.report.per_group_scores.push_back(best.score);
    out.report.per_group_init_scores.push_back(sol.init_score);
    out.report.iterations_used += static_cast<int>(sol.score_trace.size()) - 1;

    // Tail update with the retained error coordinates only.
    const std::size_t tail = s + g;
    if (tail < d_in) {
      for (std::size_t l = 0; l < g; ++l) {
        propagate_column(working, tail, best.e.column(l),
                         hstate.u.row(s + l).subspan(tail));
      }
    }
  }
  out.report.objective_frob = squared_norm(out.e);
  out.report.objective_trace = hessian_objective(w, out.q, hstate.h);
  out.report.wall_time = seconds_since(start);
  return out;
}

BaselineResult gptq_quantize_layer(const Tensor2D& w, const HessianState& hstate, int bits,
                                   std::size_t g) {
  const auto start = std::chrono::steady_clock::now();
  require_bits(bits);
  require_groups(w, g);
  require_hessian(w, hstate);
  const std::size_t d_out = w.rows();
  const std::size_t d_in = w.cols();

  BaselineResult out{Tensor2D(d_out, d_in), {}};
  Tensor2D e(d_out, d_in);
  Tensor2D working = w;
  std::vector<AffineRow> grids;
  std::vector<double> e_col(d_out);
  for (std::size_t l = 0; l < d_in; ++l) {
    if (l % g == 0) {
      grids.clear();
      for (std::size_t r = 0; r < d_out; ++r) grids.emplace_back(working.row(r).subspan(l, g), bits);
    }
    const double diag = hstate.u(l, l);
    for (std::size_t r = 0; r < d_out; ++r) {
      const double q = grids[r].reconstruct(working(r, l));
      out.q(r, l) = q;
      e_col[r] = (working(r, l) - q) / diag;
      e(r, l) = e_col[r];
    }
    if (l + 1 < d_in) propagate_column(working, l + 1, e_col, hstate.u.row(l).subspan(l + 1));
  }
  for (std::size_t s = 0; s < d_in; s += g) {
    out.report.per_group_scores.push_back(squared_norm(e.block(0, s, d_out, g)));
  }
  out.report.objective_frob = squared_norm(e);
  out.report.objective_trace = hessian_objective(w, out.q, hstate.h);
  out.report.wall_time = seconds_since(start);
  return out;
}

Tensor2D rtn_quantize_layer(const Tensor2D& w, int bits, std::size_t g) {
  require_bits(bits);
  require_groups(w, g);
  Tensor2D q(w.rows(), w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t s = 0; s < w.cols(); s += g) {
      const auto seg = w.row(r).subspan(s, g);
      const AffineRow grid(seg, bits);
      for (std::size_t j = 0; j < g; ++j) q(r, s + j) = grid.reconstruct(seg[j]);
    }
  }
  return q;
}

}  // namespace bpdq
