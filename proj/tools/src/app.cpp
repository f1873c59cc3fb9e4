#include "app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "bpdq/config.hpp"
#include "bpdq/error.hpp"
#include "bpdq/kernel.hpp"
#include "bpdq/solver.hpp"
#include "bpdq/tensorio.hpp"
#include "outlier.hpp"
#include "theory.hpp"

namespace bpdq::app {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr int kSchemaVersion = 1;

struct Options {
  RunConfig cfg;
  std::string weights;
  std::string calib;
  std::string synth;
  double tail_index = 0.0;
  int layers = 1;
  int reps = 20;
  std::string output;
  std::string report;
  std::string input;
  std::string suite = "all";
  std::optional<std::size_t> theory_g;
  bool identity_hessian = false;
  bool exact_weights = false;
  bool inject_fault = false;
};

struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t d_out = 0;
  std::size_t d_in = 0;
  std::size_t n = 0;
};

struct LayerInput {
  Tensor2D w;
  Tensor2D x;
  std::uint64_t seed = 0;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kDimension:
    case ErrorKind::kOracleSize:
      return kExitConfig;
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
    case ErrorKind::kTruncated:
    case ErrorKind::kNonFinite:
      return kExitIo;
    case ErrorKind::kSingular:
    case ErrorKind::kPrecondition:
      return kExitNumerical;
  }
  return kExitNumerical;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

SynthSpec parse_synth(const std::string& text) {
  std::vector<std::uint64_t> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, "--synth expects SEED,DOUT,DIN[,N] as integers, got '" + text + "'");
    }
  }
  if (parts.size() != 3 && parts.size() != 4) {
    throw Error(ErrorKind::kConfig, "--synth expects SEED,DOUT,DIN[,N], got '" + text + "'");
  }
  SynthSpec s{parts[0], parts[1], parts[2], parts.size() == 4 ? parts[3] : 8 * parts[2]};
  if (s.d_out == 0 || s.d_in == 0 || s.n == 0) {
    throw Error(ErrorKind::kConfig, "--synth dimensions must be positive, got '" + text + "'");
  }
  return s;
}

// Every (row, group) segment is c0 + step * code on the UINT-k grid, with the
// codes cycling so both extremes appear whenever g >= 2^k.
Tensor2D grid_exact_weights(std::size_t d_out, std::size_t d_in, std::size_t g, int k,
                            std::uint64_t seed) {
  SeededNormal rng(seed ^ 0x6772696455ULL);
  const std::size_t levels = std::size_t{1} << k;
  Tensor2D w(d_out, d_in);
  for (std::size_t r = 0; r < d_out; ++r) {
    for (std::size_t s = 0; s < d_in; s += g) {
      const double c0 = rng.normal();
      const double step = 0.1 + rng.uniform();
      for (std::size_t j = 0; j < g; ++j) {
        w(r, s + j) = c0 + step * static_cast<double>((j * 7 + r) % levels);
      }
    }
  }
  return w;
}

std::vector<LayerInput> load_layers(const Options& opt) {
  if (opt.layers < 1) throw Error(ErrorKind::kConfig, "--layers must be >= 1");
  std::vector<LayerInput> out;
  if (!opt.weights.empty() || !opt.calib.empty()) {
    if (opt.weights.empty() || opt.calib.empty()) {
      throw Error(ErrorKind::kConfig, "--weights and --calib must be given together");
    }
    if (!opt.synth.empty()) throw Error(ErrorKind::kConfig, "--synth cannot be combined with --weights");
    if (opt.layers != 1) throw Error(ErrorKind::kConfig, "--layers needs --synth");
    LayerInput in{load_tensor(opt.weights), load_tensor(opt.calib), opt.cfg.seed};
    if (in.x.rows() != in.w.cols()) {
      throw Error(ErrorKind::kDimension, "calibration has " + std::to_string(in.x.rows()) +
                                             " channels, weights have d_in=" +
                                             std::to_string(in.w.cols()));
    }
    out.push_back(std::move(in));
  } else if (!opt.synth.empty()) {
    const SynthSpec spec = parse_synth(opt.synth);
    for (int i = 0; i < opt.layers; ++i) {
      const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(i);
      auto layer = synth_layer(seed, spec.d_out, spec.d_in, spec.n, opt.tail_index);
      out.push_back({std::move(layer.weights), std::move(layer.activations), seed});
    }
  } else {
    throw Error(ErrorKind::kConfig, "an input is required: --weights PATH --calib PATH, or --synth SEED,DOUT,DIN[,N]");
  }
  for (auto& in : out) {
    opt.cfg.validate(in.w.cols());
    if (opt.exact_weights) in.w = grid_exact_weights(in.w.rows(), in.w.cols(), opt.cfg.g, opt.cfg.k, in.seed);
    if (opt.identity_hessian) in.x = Tensor2D::identity(in.w.cols());
  }
  return out;
}

HessianState hessian_for(const Options& opt, const Tensor2D& x) {
  return hessian_from_activations(x, opt.identity_hessian ? 0.0 : opt.cfg.percdamp);
}

json config_json(const RunConfig& cfg) {
  return {{"k", cfg.k},         {"g", cfg.g},         {"iters", cfg.iters},
          {"alpha", cfg.alpha}, {"percdamp", cfg.percdamp}, {"coeff_bits", cfg.coeff_bits},
          {"seed", cfg.seed}};
}

json report_header(const std::string& command, const Options& opt) {
  return {{"schema_version", kSchemaVersion},
          {"command", command},
          {"config", config_json(opt.cfg)},
          {"seed", opt.cfg.seed}};
}

void require_finite(const json& j, const std::string& path) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) {
    throw Error(ErrorKind::kNonFinite, "report field " + path + " is not finite");
  }
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) require_finite(value, path + "." + key);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) require_finite(j[i], path + "[" + std::to_string(i) + "]");
  }
}

void emit(const json& report, const Options& opt, std::ostream& out) {
  require_finite(report, "report");
  const std::string text = report.dump(2) + "\n";
  if (opt.report.empty()) {
    out << text;
    return;
  }
  std::ofstream f(opt.report, std::ios::binary);
  if (!f || !(f << text) || !f.flush()) throw Error(ErrorKind::kIo, "cannot write report " + opt.report);
}

struct Quantized {
  LayerSolution solution;
  Tensor2D w_hat;
  ObjectiveValue objective;
};

Quantized quantize_one(const Options& opt, const LayerInput& in) {
  const HessianState hs = hessian_for(opt, in.x);
  Quantized q{bpdq_quantize_layer(in.w, hs, opt.cfg), {}, {}};
  q.w_hat = dequantize(q.solution.layer);
  q.objective = objective(in.w, q.w_hat, in.x);
  return q;
}

int cmd_quantize(const Options& opt, std::ostream& out) {
  const auto start = Clock::now();
  if (opt.layers != 1) throw Error(ErrorKind::kConfig, "quantize handles one layer; use compare for --layers");
  const auto inputs = load_layers(opt);
  const auto& in = inputs.front();
  const Quantized q = quantize_one(opt, in);
  if (!opt.output.empty()) save_layer(q.solution.layer, opt.output);

  json r = report_header("quantize", opt);
  r["shape"] = {{"d_out", in.w.rows()}, {"d_in", in.w.cols()}, {"n_samples", in.x.cols()}};
  r["bpw"] = bits_per_weight(opt.cfg.k, opt.cfg.g, opt.cfg.coeff_bits);
  r["objective_frob"] = q.objective.frob;
  r["objective_trace"] = q.objective.trace;
  r["per_group_scores"] = q.solution.report.per_group_scores;
  r["per_group_init_scores"] = q.solution.report.per_group_init_scores;
  r["iterations_used"] = q.solution.report.iterations_used;
  r["wall_time_s"] = seconds_since(start);
  emit(r, opt, out);
  return kExitOk;
}

int cmd_dequantize(const Options& opt, std::ostream& out) {
  if (opt.output.empty()) throw Error(ErrorKind::kConfig, "dequantize needs -o PATH");
  const QuantizedLayer layer = load_layer(opt.input);
  save_tensor(dequantize(layer), opt.output);
  json r{{"schema_version", kSchemaVersion},
         {"command", "dequantize"},
         {"shape", {{"d_out", layer.d_out}, {"d_in", layer.d_in}}},
         {"k", layer.k},
         {"g", layer.g},
         {"coeff_bits", coeff_dtype_bits(layer.dtype)},
         {"bpw", bits_per_weight(layer.k, layer.g, coeff_dtype_bits(layer.dtype))}};
  emit(r, opt, out);
  return kExitOk;
}

json stats_json(std::span<const OutlierStats> per_layer) {
  std::vector<double> diagr;
  std::int64_t cnt10 = 0;
  for (const auto& s : per_layer) {
    diagr.push_back(s.diagr);
    cnt10 += s.cnt10;
  }
  return {{"diagr_p95", percentile95(diagr)}, {"cnt10", cnt10}};
}

int cmd_evaluate(const Options& opt, std::ostream& out) {
  const auto start = Clock::now();
  const auto inputs = load_layers(opt);
  if (!opt.input.empty() && inputs.size() != 1) {
    throw Error(ErrorKind::kConfig, "a stored layer can only be evaluated against one input layer");
  }
  std::vector<OutlierStats> input_stats, ref_stats, quant_stats;
  json layers = json::array();
  double frob = 0.0;
  double trace = 0.0;
  std::vector<double> scores;
  for (const auto& in : inputs) {
    Tensor2D w_hat;
    if (!opt.input.empty()) {
      const QuantizedLayer stored = load_layer(opt.input);
      if (stored.d_out != in.w.rows() || stored.d_in != in.w.cols()) {
        throw Error(ErrorKind::kDimension, "stored layer is " + std::to_string(stored.d_out) + "x" +
                                               std::to_string(stored.d_in) + ", weights are " +
                                               std::to_string(in.w.rows()) + "x" + std::to_string(in.w.cols()));
      }
      w_hat = dequantize(stored);
    } else {
      Quantized q = quantize_one(opt, in);
      scores.insert(scores.end(), q.solution.report.per_group_scores.begin(),
                    q.solution.report.per_group_scores.end());
      w_hat = std::move(q.w_hat);
    }
    const ObjectiveValue obj = objective(in.w, w_hat, in.x);
    frob += obj.frob;
    trace += obj.trace;
    input_stats.push_back(outlier_stats(in.x));
    ref_stats.push_back(outlier_stats(matmul(in.w, in.x)));
    quant_stats.push_back(outlier_stats(matmul(w_hat, in.x)));
    layers.push_back({{"seed", in.seed}, {"objective_frob", obj.frob}, {"objective_trace", obj.trace}});
  }

  json r = report_header("evaluate", opt);
  r["bpw"] = bits_per_weight(opt.cfg.k, opt.cfg.g, opt.cfg.coeff_bits);
  r["objective_frob"] = frob;
  r["objective_trace"] = trace;
  r["per_group_scores"] = scores;
  r["layers"] = layers;
  const json ref = stats_json(ref_stats);
  json quant = stats_json(quant_stats);
  quant["delta_diagr_pct"] =
      100.0 * (quant["diagr_p95"].get<double>() - ref["diagr_p95"].get<double>()) / ref["diagr_p95"].get<double>();
  quant["delta_cnt10"] = quant["cnt10"].get<std::int64_t>() - ref["cnt10"].get<std::int64_t>();
  r["outlier_stats"] = quant;
  r["reference_outlier_stats"] = ref;
  r["input_outlier_stats"] = stats_json(input_stats);
  r["wall_time_s"] = seconds_since(start);
  emit(r, opt, out);
  return kExitOk;
}

int cmd_compare(const Options& opt, std::ostream& out) {
  const auto start = Clock::now();
  const auto inputs = load_layers(opt);
  json layers = json::array();
  double sum_bpdq = 0.0, sum_gptq = 0.0, sum_rtn = 0.0;
  int wins_gptq = 0, wins_rtn = 0;
  for (const auto& in : inputs) {
    const HessianState hs = hessian_for(opt, in.x);
    const LayerSolution sol = bpdq_quantize_layer(in.w, hs, opt.cfg);
    const double bpdq = objective(in.w, dequantize(sol.layer), in.x).frob;
    const double gptq = objective(in.w, gptq_quantize_layer(in.w, hs, opt.cfg.k, opt.cfg.g).q, in.x).frob;
    const double rtn = objective(in.w, rtn_quantize_layer(in.w, opt.cfg.k, opt.cfg.g), in.x).frob;
    sum_bpdq += bpdq;
    sum_gptq += gptq;
    sum_rtn += rtn;
    wins_gptq += bpdq < gptq;
    wins_rtn += bpdq < rtn;
    layers.push_back({{"seed", in.seed}, {"bpdq", bpdq}, {"gptq", gptq}, {"rtn", rtn}});
  }
  const double n = static_cast<double>(inputs.size());
  json r = report_header("compare", opt);
  r["layers"] = layers;
  r["bpw"] = bits_per_weight(opt.cfg.k, opt.cfg.g, opt.cfg.coeff_bits);
  r["baseline_bpw"] = bits_per_weight_fixed(opt.cfg.k, opt.cfg.g, 16);
  r["objective_frob"] = sum_bpdq / n;
  r["baseline_objectives"] = {{"gptq", sum_gptq / n}, {"rtn", sum_rtn / n}};
  r["win_rate_vs_gptq"] = wins_gptq / n;
  r["win_rate_vs_rtn"] = wins_rtn / n;
  r["wall_time_s"] = seconds_since(start);
  emit(r, opt, out);
  return kExitOk;
}

QuantizedLayer random_layer(const SynthSpec& spec, const RunConfig& cfg) {
  auto layer = QuantizedLayer::zeros(spec.d_out, spec.d_in, cfg.g, cfg.k, coeff_dtype_for_bits(cfg.coeff_bits));
  SeededNormal rng(spec.seed);
  const auto levels = static_cast<double>(1u << cfg.k);
  for (std::size_t grp = 0; grp < spec.d_in / cfg.g; ++grp) {
    GroupPlanes planes(spec.d_out, cfg.g, cfg.k);
    Tensor2D coeffs(spec.d_out, static_cast<std::size_t>(cfg.k) + 1);
    for (std::size_t r = 0; r < spec.d_out; ++r) {
      for (std::size_t j = 0; j < cfg.g; ++j) planes.set_code(r, j, static_cast<std::uint8_t>(rng.uniform() * levels));
      for (auto& v : coeffs.row(r)) v = rng.normal();
    }
    layer.set_group(grp, planes, coeffs);
  }
  return layer;
}

double median_ns(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  return samples[(samples.size() - 1) / 2];
}

int cmd_bench(const Options& opt, std::ostream& out) {
  const auto start = Clock::now();
  if (opt.reps < 1) throw Error(ErrorKind::kConfig, "--reps must be >= 1");
  QuantizedLayer layer;
  std::uint64_t seed = opt.cfg.seed;
  if (!opt.input.empty()) {
    layer = load_layer(opt.input);
  } else {
    const SynthSpec spec = parse_synth(opt.synth.empty() ? "0,256,1024" : opt.synth);
    opt.cfg.validate(spec.d_in);
    layer = random_layer(spec, opt.cfg);
    seed = spec.seed;
  }
  SeededNormal rng(seed ^ 0x78ULL);
  std::vector<double> x(layer.d_in);
  for (auto& v : x) v = rng.normal();
  const Tensor2D dense = dequantize(layer);

  auto time_call = [](auto&& fn) {
    const auto t0 = Clock::now();
    fn();
    return std::chrono::duration<double, std::nano>(Clock::now() - t0).count();
  };
  std::vector<double> lut_ns, dense_ns, dequant_ns;
  std::vector<double> y_lut, y_dense;
  for (int rep = 0; rep <= opt.reps; ++rep) {  // rep 0 warms up
    const double a = time_call([&] { y_lut = lut_matvec(layer, x); });
    const double b = time_call([&] { y_dense = dense_matvec(dense, x); });
    const double c = time_call([&] { y_dense = dense_matvec(dequantize(layer), x); });
    if (rep == 0) continue;
    lut_ns.push_back(a);
    dense_ns.push_back(b);
    dequant_ns.push_back(c);
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y_lut.size(); ++i) {
    num = std::max(num, std::abs(y_lut[i] - y_dense[i]));
    den = std::max(den, std::abs(y_dense[i]));
  }
  const double lut = median_ns(lut_ns);
  const double dense_med = median_ns(dense_ns);
  const double dequant_med = median_ns(dequant_ns);
  const std::size_t chunks = layer.row_bytes();

  RunConfig shown = opt.cfg;
  shown.k = layer.k;
  shown.g = layer.g;
  shown.coeff_bits = coeff_dtype_bits(layer.dtype);
  json r{{"schema_version", kSchemaVersion},
         {"command", "bench"},
         {"config", config_json(shown)},
         {"seed", seed},
         {"shape", {{"d_out", layer.d_out}, {"d_in", layer.d_in}}},
         {"reps", opt.reps},
         {"ops",
          {{"dense_mults", layer.d_out * layer.d_in},
           {"lut_tables", chunks},
           {"lut_table_entries", chunks * 256},
           {"lut_lookups", static_cast<std::size_t>(layer.k) * layer.d_out * chunks}}},
         {"lut_ns_median", lut},
         {"dense_ns_median", dense_med},
         {"dequant_dense_ns_median", dequant_med},
         {"speedup_vs_dense", dense_med / std::max(lut, 1.0)},
         {"speedup_vs_dequant_dense", dequant_med / std::max(lut, 1.0)},
         {"max_rel_deviation", den > 0.0 ? num / den : num},
         {"wall_time_s", seconds_since(start)}};
  emit(r, opt, out);
  return kExitOk;
}

int cmd_theory_check(const Options& opt, std::ostream& out) {
  const auto start = Clock::now();
  std::vector<std::string> names;
  if (opt.suite == "all") {
    names = theory_suite_names();
  } else {
    names.push_back(opt.suite);
  }
  if (opt.theory_g && (*opt.theory_g < 3 || *opt.theory_g > 8)) {
    throw Error(ErrorKind::kConfig, "--g must be in 3..8 for the exhaustive oracles, got " +
                                        std::to_string(*opt.theory_g));
  }
  TheoryOptions topts{opt.cfg.seed, opt.theory_g, opt.inject_fault};
  json suites = json::object();
  bool all_ok = true;
  std::ostringstream lines;
  for (const auto& name : names) {
    const SuiteResult res = run_theory_suite(name, topts);
    all_ok = all_ok && res.ok();
    lines << (res.ok() ? "PASS " : "FAIL ") << res.name << ": " << res.passed << "/" << res.total << " passed\n";
    for (const auto& f : res.failures) lines << "  failed: " << f << "\n";
    suites[name] = {{"passed", res.passed}, {"total", res.total}, {"failures", res.failures}};
  }
  if (opt.report.empty()) {
    out << lines.str();
  } else {
    json r{{"schema_version", kSchemaVersion}, {"command", "theory-check"}, {"seed", opt.cfg.seed},
           {"suites", suites}, {"ok", all_ok}, {"wall_time_s", seconds_since(start)}};
    emit(r, opt, out);
    out << lines.str();
  }
  return all_ok ? kExitOk : kExitTheoryFailure;
}

void add_config_flags(CLI::App* cmd, Options& opt, bool require_k) {
  auto* k = cmd->add_option("-k", opt.cfg.k, "bit-planes per weight (1..8)");
  if (require_k) k->required();
  cmd->add_option("-g", opt.cfg.g, "group size (columns per coefficient set)");
  cmd->add_option("--iters", opt.cfg.iters, "refinement rounds per group")->capture_default_str();
  cmd->add_option("--alpha", opt.cfg.alpha, "ridge term of the coefficient fit")->capture_default_str();
  cmd->add_option("--percdamp", opt.cfg.percdamp, "Hessian damping as a fraction of mean(diag)")
      ->capture_default_str();
  cmd->add_option("--coeff-bits", opt.cfg.coeff_bits, "coefficient storage width")
      ->check(CLI::IsMember({16, 32, 64}))
      ->capture_default_str();
  cmd->add_option("--seed", opt.cfg.seed, "seed echoed into reports and used by seeded suites");
}

void add_input_flags(CLI::App* cmd, Options& opt) {
  cmd->add_option("--weights", opt.weights, "TNSR weights, d_out x d_in");
  cmd->add_option("--calib", opt.calib, "TNSR calibration activations, d_in x N");
  cmd->add_option("--synth", opt.synth, "synthetic layer SEED,DOUT,DIN[,N] (N defaults to 8*DIN)");
  cmd->add_option("--tail-index", opt.tail_index, "heavy-tail index of synthetic channel scales");
  cmd->add_flag("--identity-hessian", opt.identity_hessian, "replace activations by the identity (H = I)");
  cmd->add_flag("--exact-weights", opt.exact_weights, "replace weights by UINT-k grid values per group");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  opt.cfg.g = 64;
  CLI::App app{"Bit-plane decomposition quantization of linear layers", "bpdq"};
  app.require_subcommand(1);

  auto* quantize = app.add_subcommand("quantize", "quantize one layer and write a BPQZ file");
  add_input_flags(quantize, opt);
  add_config_flags(quantize, opt, true);
  quantize->add_option("-o", opt.output, "output BPQZ path");
  quantize->add_option("--report", opt.report, "report JSON path (stdout if omitted)");

  auto* dequant = app.add_subcommand("dequantize", "expand a BPQZ file to a dense TNSR tensor");
  dequant->add_option("input", opt.input, "BPQZ path")->required();
  dequant->add_option("-o", opt.output, "output TNSR path")->required();
  dequant->add_option("--report", opt.report, "report JSON path (stdout if omitted)");

  auto* evaluate = app.add_subcommand("evaluate", "objective and activation outlier statistics");
  evaluate->add_option("input", opt.input, "stored BPQZ layer (quantized on the fly if omitted)");
  add_input_flags(evaluate, opt);
  add_config_flags(evaluate, opt, true);
  evaluate->add_option("--layers", opt.layers, "synthetic layers (seeds SEED..SEED+L-1)");
  evaluate->add_option("--report", opt.report, "report JSON path (stdout if omitted)");

  auto* compare = app.add_subcommand("compare", "BPDQ against GPTQ and RTN at the same bit width");
  add_input_flags(compare, opt);
  add_config_flags(compare, opt, false);
  compare->add_option("--layers", opt.layers, "synthetic layers (seeds SEED..SEED+L-1)");
  compare->add_option("--report", opt.report, "report JSON path (stdout if omitted)");

  auto* bench = app.add_subcommand("bench", "LUT matvec against the dense path");
  bench->add_option("input", opt.input, "BPQZ layer (random layer from --synth if omitted)");
  bench->add_option("--synth", opt.synth, "random layer SEED,DOUT,DIN");
  add_config_flags(bench, opt, false);
  bench->add_option("--reps", opt.reps, "timed repetitions")->capture_default_str();
  bench->add_option("--report", opt.report, "report JSON path (stdout if omitted)");

  auto* theory = app.add_subcommand("theory-check", "run the grid and solver property suites");
  theory->add_option("--suite", opt.suite, "prop1, prop2, b1, b2, b3 or all")->capture_default_str();
  theory->add_option("--g", opt.theory_g, "group size override");
  theory->add_option("--seed", opt.cfg.seed, "suite seed");
  theory->add_option("--report", opt.report, "report JSON path");
  theory->add_flag("--inject-fault", opt.inject_fault)->group("");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  // Defaults that depend on the command.
  if (compare->parsed()) {
    if (opt.synth.empty() && opt.weights.empty() && opt.calib.empty()) {
      opt.synth = std::to_string(opt.cfg.seed) + ",32,256,1024";
      if (compare->count("--tail-index") == 0) opt.tail_index = 1.0;
      if (compare->count("--layers") == 0) opt.layers = 50;
    }
  }

  try {
    if (quantize->parsed()) return cmd_quantize(opt, out);
    if (dequant->parsed()) return cmd_dequantize(opt, out);
    if (evaluate->parsed()) return cmd_evaluate(opt, out);
    if (compare->parsed()) return cmd_compare(opt, out);
    if (bench->parsed()) return cmd_bench(opt, out);
    return cmd_theory_check(opt, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return kExitNumerical;
  }
}

}  // namespace bpdq::app
