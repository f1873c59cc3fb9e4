#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bpdq/bpd.hpp"
#include "bpdq/tensor.hpp"

namespace bpdq {

enum class CoeffDtype : std::uint8_t { kF16 = 0, kF32 = 1, kF64 = 2 };

CoeffDtype coeff_dtype_for_bits(int coeff_bits);
int coeff_dtype_bits(CoeffDtype dtype) noexcept;

/// Rounds to the nearest value representable in dtype (ties to even).
/// Values beyond the f16 range become +-inf.
double round_to_dtype(double v, CoeffDtype dtype) noexcept;

std::uint16_t encode_half(double v) noexcept;
double decode_half(std::uint16_t bits) noexcept;

/// Variable-grid layer: W^ = REP(C0) + sum_i REP(C_i) . B_i.
///
/// coeffs holds (d_in/g) x d_out x (k+1) values ordered by (group, row,
/// coefficient index), already rounded to the storage dtype. planes holds k
/// bit-packed d_out x d_in matrices, each row padded to ceil(d_in/8) bytes,
/// least-significant bit = lowest column.
struct QuantizedLayer {
  std::size_t d_out = 0;
  std::size_t d_in = 0;
  std::size_t g = 0;
  int k = 0;
  CoeffDtype dtype = CoeffDtype::kF64;
  std::vector<double> coeffs;
  std::vector<std::uint8_t> planes;

  static QuantizedLayer zeros(std::size_t d_out, std::size_t d_in, std::size_t g, int k,
                              CoeffDtype dtype);

  std::size_t groups() const noexcept { return g == 0 ? 0 : d_in / g; }
  std::size_t row_bytes() const noexcept { return (d_in + 7) / 8; }
  std::size_t plane_bytes() const noexcept { return d_out * row_bytes(); }

  std::span<const double> coeff(std::size_t group, std::size_t row) const noexcept {
    return {coeffs.data() + (group * d_out + row) * (k + 1), static_cast<std::size_t>(k) + 1};
  }
  bool bit(int plane, std::size_t row, std::size_t col) const noexcept {
    return (planes[(plane - 1) * plane_bytes() + row * row_bytes() + col / 8] >> (col % 8)) & 1u;
  }
  unsigned code(std::size_t row, std::size_t col) const noexcept;

  /// Stores a solved group: codes from planes, coefficients rounded to dtype.
  void set_group(std::size_t group, const GroupPlanes& group_planes, const Tensor2D& group_coeffs);

  /// Throws Error(kFormat) if sizes or header fields are inconsistent.
  void validate() const;

  friend bool operator==(const QuantizedLayer&, const QuantizedLayer&) = default;
};

Tensor2D dequantize(const QuantizedLayer& layer);

// BPQZ container, little-endian:
//   "BPQZ" | u32 version=1 | u64 d_out | u64 d_in | u32 g | u8 k | u8 dtype | u16 reserved=0
//   | coefficients (group, row, index) | planes 1..k, d_out rows of ceil(d_in/8) bytes
inline constexpr std::uint32_t kLayerFormatVersion = 1;
inline constexpr std::size_t kLayerHeaderBytes = 32;

std::vector<std::uint8_t> pack(const QuantizedLayer& layer);
QuantizedLayer unpack(std::span<const std::uint8_t> bytes);

void save_layer(const QuantizedLayer& layer, const std::filesystem::path& path);
QuantizedLayer load_layer(const std::filesystem::path& path);

/// y = W^ x straight from the packed planes. Per 8-column chunk, a 256-entry
/// table of partial sums of x is built once; each plane row then costs one
/// table lookup per byte.
std::vector<double> lut_matvec(const QuantizedLayer& layer, std::span<const double> x);

/// Single-precision variant of lut_matvec (tables and accumulation in float).
std::vector<float> lut_matvec_f32(const QuantizedLayer& layer, std::span<const float> x);

std::vector<double> dense_matvec(const Tensor2D& w, std::span<const double> x);

/// k + (k+1) * coeff_bits / g.
double bits_per_weight(int k, std::size_t g, int coeff_bits);

/// b + (scale_bits + b) / g: a scale per group plus a b-bit zero point.
double bits_per_weight_fixed(int b, std::size_t g, int scale_bits);

}  // namespace bpdq
