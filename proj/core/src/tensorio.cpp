#include "bpdq/tensorio.hpp"

#include <cstdint>
#include <cmath>
#include <numbers>
#include <string>

#include "bpdq/config.hpp"
#include "bpdq/error.hpp"
#include "bytes.hpp"

namespace bpdq {

void RunConfig::validate(std::size_t d_in) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kConfig, msg); };
  if (k < 1 || k > 8) fail("k must be in 1..8, got " + std::to_string(k));
  if (g < static_cast<std::size_t>(k) + 1) {
    fail("group size g=" + std::to_string(g) + " must be at least k+1=" + std::to_string(k + 1));
  }
  if (d_in % g != 0) {
    fail("group size g=" + std::to_string(g) + " does not divide d_in=" + std::to_string(d_in));
  }
  if (iters < 0) fail("iters must be >= 0");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(percdamp >= 0.0)) fail("percdamp must be >= 0");
  if (coeff_bits != 16 && coeff_bits != 32 && coeff_bits != 64) {
    fail("coeff_bits must be 16, 32 or 64, got " + std::to_string(coeff_bits));
  }
}

void save_tensor(const Tensor2D& t, const std::filesystem::path& path, TensorDtype dtype) {
  detail::ByteWriter w;
  w.raw("TNSR");
  w.u32(kTensorFormatVersion);
  w.u8(static_cast<std::uint8_t>(dtype));
  w.u8(2);
  w.u64(t.rows());
  w.u64(t.cols());
  for (double v : t.values()) {
    if (dtype == TensorDtype::kFloat64) {
      w.f64(v);
    } else {
      w.f32(static_cast<float>(v));
    }
  }
  detail::write_file(path, w.bytes());
}

Tensor2D load_tensor(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, path.string());
  if (bytes.size() < 4 || r.raw(4) != "TNSR") {
    throw Error(ErrorKind::kFormat, path.string() + ": bad magic, expected TNSR");
  }
  const auto version = r.u32();
  if (version != kTensorFormatVersion) {
    throw Error(ErrorKind::kFormat, path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto dtype = r.u8();
  if (dtype > 1) throw Error(ErrorKind::kFormat, path.string() + ": unknown dtype");
  const auto rank = r.u8();
  if (rank != 2) throw Error(ErrorKind::kFormat, path.string() + ": rank must be 2");
  const auto rows = r.u64();
  const auto cols = r.u64();
  const std::size_t width = dtype == 0 ? 8 : 4;
  if (cols != 0 && rows > SIZE_MAX / width / cols) {
    throw Error(ErrorKind::kFormat, path.string() + ": declared shape overflows");
  }
  const std::size_t count = rows * cols;
  if (r.remaining() != count * width) {
    throw Error(r.remaining() < count * width ? ErrorKind::kTruncated : ErrorKind::kFormat,
                path.string() + ": payload has " + std::to_string(r.remaining()) +
                    " bytes, shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " needs " + std::to_string(count * width));
  }
  std::vector<double> data(count);
  for (auto& v : data) v = dtype == 0 ? r.f64() : static_cast<double>(r.f32());
  Tensor2D t(rows, cols, std::move(data));
  if (!t.all_finite()) {
    throw Error(ErrorKind::kNonFinite, path.string() + ": payload contains NaN or Inf");
  }
  return t;
}

SeededNormal::SeededNormal(std::uint64_t seed) : engine_(seed) {}

double SeededNormal::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededNormal::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; 1-u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  double s = 0.0;
  double c = 0.0;
#if defined(__GLIBC__)
  // Optimizers fuse sin/cos into sincos, which differs by an ulp in glibc;
  // calling it directly keeps streams identical across build types.
  ::sincos(angle, &s, &c);
#else
  s = std::sin(angle);
  c = std::cos(angle);
#endif
  spare_ = radius * s;
  has_spare_ = true;
  return radius * c;
}

std::vector<double> synth_channel_scales(std::uint64_t seed, std::size_t d_in, double tail_index) {
  std::vector<double> scales(d_in, 1.0);
  if (tail_index == 0.0) return scales;
  SeededNormal rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (auto& s : scales) s = std::pow(1.0 - rng.uniform(), -tail_index);
  return scales;
}

SynthLayer synth_layer(std::uint64_t seed, std::size_t d_out, std::size_t d_in,
                       std::size_t n_samples, double tail_index) {
  SynthLayer out{Tensor2D(d_out, d_in), Tensor2D(d_in, n_samples)};
  SeededNormal rng(seed);
  for (auto& v : out.weights.values()) v = rng.normal();
  const auto scales = synth_channel_scales(seed, d_in, tail_index);
  for (std::size_t i = 0; i < d_in; ++i) {
    for (auto& v : out.activations.row(i)) v = scales[i] * rng.normal();
  }
  return out;
}

}  // namespace bpdq
