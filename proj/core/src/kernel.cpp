#include "bpdq/kernel.hpp"

#include <bit>
#include <cfenv>
#include <cmath>
#include <limits>
#include <string>

#include "bpdq/error.hpp"
#include "bpdq/grid.hpp"
#include "bytes.hpp"

namespace bpdq {

CoeffDtype coeff_dtype_for_bits(int coeff_bits) {
  switch (coeff_bits) {
    case 16: return CoeffDtype::kF16;
    case 32: return CoeffDtype::kF32;
    case 64: return CoeffDtype::kF64;
    default:
      throw Error(ErrorKind::kConfig, "coefficient width must be 16, 32 or 64, got " +
                                          std::to_string(coeff_bits));
  }
}

int coeff_dtype_bits(CoeffDtype dtype) noexcept {
  switch (dtype) {
    case CoeffDtype::kF16: return 16;
    case CoeffDtype::kF32: return 32;
    case CoeffDtype::kF64: return 64;
  }
  return 0;
}

namespace {

constexpr double kHalfMax = 65504.0;
constexpr int kHalfMinNormalExp = -14;

double round_half(double v) noexcept {
  if (v == 0.0 || !std::isfinite(v)) return v;
  int e = 0;
  std::frexp(v, &e);  // |v| = m * 2^e, m in [0.5, 1)
  const int quantum = std::max(e - 11, kHalfMinNormalExp - 10);
  const double r = std::ldexp(std::nearbyint(std::ldexp(v, -quantum)), quantum);
  if (std::abs(r) > kHalfMax) return std::copysign(std::numeric_limits<double>::infinity(), v);
  return r;
}

}  // namespace

double round_to_dtype(double v, CoeffDtype dtype) noexcept {
  switch (dtype) {
    case CoeffDtype::kF16: return round_half(v);
    case CoeffDtype::kF32: return static_cast<double>(static_cast<float>(v));
    case CoeffDtype::kF64: return v;
  }
  return v;
}

std::uint16_t encode_half(double v) noexcept {
  const double r = round_half(v);
  const std::uint16_t sign = std::signbit(r) ? 0x8000u : 0u;
  const double a = std::abs(r);
  if (std::isnan(r)) return 0x7e00u;
  if (std::isinf(a)) return sign | 0x7c00u;
  if (a == 0.0) return sign;
  if (a < std::ldexp(1.0, kHalfMinNormalExp)) {
    return sign | static_cast<std::uint16_t>(std::ldexp(a, 24));
  }
  int e = 0;
  const double m = std::frexp(a, &e);  // a = m * 2^e
  const auto exp_field = static_cast<std::uint16_t>(e - 1 + 15);
  const auto mant = static_cast<std::uint16_t>(std::ldexp(m * 2.0 - 1.0, 10));
  return sign | static_cast<std::uint16_t>(exp_field << 10) | mant;
}

double decode_half(std::uint16_t bits) noexcept {
  const double sign = (bits & 0x8000u) ? -1.0 : 1.0;
  const int exp_field = (bits >> 10) & 0x1f;
  const int mant = bits & 0x3ff;
  if (exp_field == 0) return sign * std::ldexp(static_cast<double>(mant), -24);
  if (exp_field == 31) {
    return mant == 0 ? sign * std::numeric_limits<double>::infinity()
                     : std::numeric_limits<double>::quiet_NaN();
  }
  return sign * std::ldexp(1.0 + mant / 1024.0, exp_field - 15);
}

QuantizedLayer QuantizedLayer::zeros(std::size_t d_out, std::size_t d_in, std::size_t g, int k,
                                     CoeffDtype dtype) {
  if (k < 1 || k > 8 || g == 0 || d_in % g != 0) {
    throw Error(ErrorKind::kConfig, "invalid layer shape: k=" + std::to_string(k) +
                                        " g=" + std::to_string(g) + " d_in=" + std::to_string(d_in));
  }
  QuantizedLayer layer;
  layer.d_out = d_out;
  layer.d_in = d_in;
  layer.g = g;
  layer.k = k;
  layer.dtype = dtype;
  layer.coeffs.assign(layer.groups() * d_out * (static_cast<std::size_t>(k) + 1), 0.0);
  layer.planes.assign(static_cast<std::size_t>(k) * layer.plane_bytes(), 0);
  return layer;
}

unsigned QuantizedLayer::code(std::size_t row, std::size_t col) const noexcept {
  unsigned c = 0;
  for (int i = 1; i <= k; ++i) c |= static_cast<unsigned>(bit(i, row, col)) << (i - 1);
  return c;
}

void QuantizedLayer::set_group(std::size_t group, const GroupPlanes& group_planes,
                               const Tensor2D& group_coeffs) {
  if (group >= groups() || group_planes.rows() != d_out || group_planes.cols() != g ||
      group_planes.k() != k || group_coeffs.rows() != d_out ||
      group_coeffs.cols() != static_cast<std::size_t>(k) + 1) {
    throw Error(ErrorKind::kDimension, "set_group: block does not match layer shape");
  }
  const std::size_t kp1 = static_cast<std::size_t>(k) + 1;
  for (std::size_t r = 0; r < d_out; ++r) {
    for (std::size_t a = 0; a < kp1; ++a) {
      const double v = round_to_dtype(group_coeffs(r, a), dtype);
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kPrecondition, "coefficient " + std::to_string(group_coeffs(r, a)) +
                                                  " overflows the storage dtype");
      }
      coeffs[(group * d_out + r) * kp1 + a] = v;
    }
    for (std::size_t j = 0; j < g; ++j) {
      const std::size_t col = group * g + j;
      const unsigned code = group_planes.code(r, j);
      for (int i = 1; i <= k; ++i) {
        auto& byte = planes[(i - 1) * plane_bytes() + r * row_bytes() + col / 8];
        const auto mask = static_cast<std::uint8_t>(1u << (col % 8));
        if ((code >> (i - 1)) & 1u) {
          byte |= mask;
        } else {
          byte &= static_cast<std::uint8_t>(~mask);
        }
      }
    }
  }
}

void QuantizedLayer::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kFormat, msg); };
  if (k < 1 || k > 8) fail("plane count k=" + std::to_string(k) + " outside 1..8");
  if (g == 0 || d_in % g != 0) {
    fail("group size g=" + std::to_string(g) + " does not divide d_in=" + std::to_string(d_in));
  }
  if (coeffs.size() != groups() * d_out * (static_cast<std::size_t>(k) + 1)) {
    fail("coefficient payload has " + std::to_string(coeffs.size()) + " values");
  }
  if (planes.size() != static_cast<std::size_t>(k) * plane_bytes()) {
    fail("plane payload has " + std::to_string(planes.size()) + " bytes, expected " +
         std::to_string(static_cast<std::size_t>(k) * plane_bytes()));
  }
}

Tensor2D dequantize(const QuantizedLayer& layer) {
  layer.validate();
  Tensor2D w(layer.d_out, layer.d_in);
  std::vector<double> levels(std::size_t{1} << layer.k);
  for (std::size_t r = 0; r < layer.d_out; ++r) {
    for (std::size_t grp = 0; grp < layer.groups(); ++grp) {
      const auto c = layer.coeff(grp, r);
      for (unsigned n = 0; n < levels.size(); ++n) levels[n] = level_value(c, n);
      for (std::size_t col = grp * layer.g; col < (grp + 1) * layer.g; ++col) {
        w(r, col) = levels[layer.code(r, col)];
      }
    }
  }
  return w;
}

std::vector<std::uint8_t> pack(const QuantizedLayer& layer) {
  layer.validate();
  detail::ByteWriter w;
  w.raw("BPQZ");
  w.u32(kLayerFormatVersion);
  w.u64(layer.d_out);
  w.u64(layer.d_in);
  w.u32(static_cast<std::uint32_t>(layer.g));
  w.u8(static_cast<std::uint8_t>(layer.k));
  w.u8(static_cast<std::uint8_t>(layer.dtype));
  w.u16(0);
  for (double c : layer.coeffs) {
    switch (layer.dtype) {
      case CoeffDtype::kF16: w.u16(encode_half(c)); break;
      case CoeffDtype::kF32: w.f32(static_cast<float>(c)); break;
      case CoeffDtype::kF64: w.f64(c); break;
    }
  }
  w.append(layer.planes);
  return w.take();
}

QuantizedLayer unpack(std::span<const std::uint8_t> bytes) {
  const std::vector<std::uint8_t> buffer(bytes.begin(), bytes.end());
  detail::ByteReader r(buffer, "BPQZ stream");
  if (buffer.size() < 4 || r.raw(4) != "BPQZ") {
    throw Error(ErrorKind::kFormat, "bad magic, expected BPQZ");
  }
  const auto version = r.u32();
  if (version != kLayerFormatVersion) {
    throw Error(ErrorKind::kFormat, "unsupported BPQZ version " + std::to_string(version));
  }
  QuantizedLayer layer;
  layer.d_out = r.u64();
  layer.d_in = r.u64();
  layer.g = r.u32();
  layer.k = r.u8();
  const auto dtype = r.u8();
  if (dtype > 2) throw Error(ErrorKind::kFormat, "unknown coefficient dtype " + std::to_string(dtype));
  layer.dtype = static_cast<CoeffDtype>(dtype);
  if (r.u16() != 0) throw Error(ErrorKind::kFormat, "reserved header field must be zero");
  if (layer.k < 1 || layer.k > 8 || layer.g == 0 || layer.d_in % layer.g != 0) {
    throw Error(ErrorKind::kFormat, "inconsistent BPQZ header");
  }

  const std::size_t n_coeffs = layer.groups() * layer.d_out * (static_cast<std::size_t>(layer.k) + 1);
  const std::size_t width = static_cast<std::size_t>(coeff_dtype_bits(layer.dtype)) / 8;
  const std::size_t n_plane_bytes = static_cast<std::size_t>(layer.k) * layer.plane_bytes();
  const std::size_t expected = n_coeffs * width + n_plane_bytes;
  if (r.remaining() < expected) {
    throw Error(ErrorKind::kTruncated, "BPQZ payload has " + std::to_string(r.remaining()) +
                                           " bytes, header implies " + std::to_string(expected));
  }
  if (r.remaining() > expected) {
    throw Error(ErrorKind::kFormat, "BPQZ payload has trailing bytes");
  }
  layer.coeffs.resize(n_coeffs);
  for (auto& c : layer.coeffs) {
    switch (layer.dtype) {
      case CoeffDtype::kF16: c = decode_half(r.u16()); break;
      case CoeffDtype::kF32: c = static_cast<double>(r.f32()); break;
      case CoeffDtype::kF64: c = r.f64(); break;
    }
  }
  const auto* p = r.take(n_plane_bytes);
  layer.planes.assign(p, p + n_plane_bytes);
  return layer;
}

void save_layer(const QuantizedLayer& layer, const std::filesystem::path& path) {
  detail::write_file(path, pack(layer));
}

QuantizedLayer load_layer(const std::filesystem::path& path) {
  try {
    return unpack(detail::read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(e.kind(), path.string() + ": " + e.message());
  }
}

namespace {

// Columns of one group as (chunk, mask) pairs over the packed row bytes.
struct ChunkSpan {
  std::size_t chunk;
  std::uint8_t mask;
};

std::vector<std::vector<ChunkSpan>> group_chunks(const QuantizedLayer& layer) {
  std::vector<std::vector<ChunkSpan>> out(layer.groups());
  for (std::size_t grp = 0; grp < layer.groups(); ++grp) {
    const std::size_t begin = grp * layer.g;
    const std::size_t end = begin + layer.g;
    for (std::size_t chunk = begin / 8; chunk * 8 < end; ++chunk) {
      unsigned mask = 0;
      for (std::size_t b = 0; b < 8; ++b) {
        const std::size_t col = chunk * 8 + b;
        if (col >= begin && col < end) mask |= 1u << b;
      }
      out[grp].push_back({chunk, static_cast<std::uint8_t>(mask)});
    }
  }
  return out;
}

template <typename T>
std::vector<T> lut_matvec_impl(const QuantizedLayer& layer, std::span<const T> x) {
  layer.validate();
  if (x.size() != layer.d_in) {
    throw Error(ErrorKind::kDimension, "lut_matvec: x has length " + std::to_string(x.size()) +
                                           ", layer expects " + std::to_string(layer.d_in));
  }
  const std::size_t n_chunks = layer.row_bytes();
  std::vector<T> table(n_chunks * 256, T(0));
  for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
    T* t = table.data() + chunk * 256;
    for (unsigned p = 1; p < 256; ++p) {
      const std::size_t col = chunk * 8 + static_cast<std::size_t>(std::countr_zero(p));
      t[p] = t[p & (p - 1)] + (col < layer.d_in ? x[col] : T(0));
    }
  }
  const auto spans = group_chunks(layer);
  std::vector<T> group_sum(layer.groups(), T(0));
  for (std::size_t grp = 0; grp < layer.groups(); ++grp) {
    for (const auto& s : spans[grp]) group_sum[grp] += table[s.chunk * 256 + s.mask];
  }

  std::vector<T> y(layer.d_out, T(0));
  for (std::size_t r = 0; r < layer.d_out; ++r) {
    T acc = T(0);
    for (std::size_t grp = 0; grp < layer.groups(); ++grp) {
      const auto c = layer.coeff(grp, r);
      acc += static_cast<T>(c[0]) * group_sum[grp];
      for (int i = 1; i <= layer.k; ++i) {
        const std::uint8_t* row = layer.planes.data() + (i - 1) * layer.plane_bytes() +
                                  r * layer.row_bytes();
        T partial = T(0);
        for (const auto& s : spans[grp]) partial += table[s.chunk * 256 + (row[s.chunk] & s.mask)];
        acc += static_cast<T>(c[static_cast<std::size_t>(i)]) * partial;
      }
    }
    y[r] = acc;
  }
  return y;
}

}  // namespace

std::vector<double> lut_matvec(const QuantizedLayer& layer, std::span<const double> x) {
  return lut_matvec_impl<double>(layer, x);
}

std::vector<float> lut_matvec_f32(const QuantizedLayer& layer, std::span<const float> x) {
  return lut_matvec_impl<float>(layer, x);
}

std::vector<double> dense_matvec(const Tensor2D& w, std::span<const double> x) {
  if (x.size() != w.cols()) throw Error(ErrorKind::kDimension, "dense_matvec: length mismatch");
  std::vector<double> y(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * x[j];
    y[r] = acc;
  }
  return y;
}

double bits_per_weight(int k, std::size_t g, int coeff_bits) {
  return k + static_cast<double>((k + 1) * coeff_bits) / static_cast<double>(g);
}

double bits_per_weight_fixed(int b, std::size_t g, int scale_bits) {
  return b + static_cast<double>(scale_bits + b) / static_cast<double>(g);
}

}  // namespace bpdq
