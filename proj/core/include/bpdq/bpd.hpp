#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "bpdq/tensor.hpp"

namespace bpdq {

/// Row-major matrix of 0/1 entries.
struct BinaryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;

  std::uint8_t operator()(std::size_t r, std::size_t c) const noexcept { return bits[r * cols + c]; }
  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;
};

/// Per-row affine 8-bit codes of a group: w ~ wmin[r] + scale[r] * z.
struct IntCodes {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> z;
  std::vector<double> wmin;
  std::vector<double> scale;

  std::uint8_t operator()(std::size_t r, std::size_t c) const noexcept { return z[r * cols + c]; }
};

/// k bit-planes B_1..B_k over a d_out x g block, stored as one k-bit code per
/// element: bit (i-1) of codes[r*cols+c] is B_i(r, c).
class GroupPlanes {
 public:
  GroupPlanes() = default;
  GroupPlanes(std::size_t rows, std::size_t cols, int k);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  int k() const noexcept { return k_; }

  std::uint8_t code(std::size_t r, std::size_t c) const noexcept { return codes_[r * cols_ + c]; }
  void set_code(std::size_t r, std::size_t c, std::uint8_t v) noexcept { codes_[r * cols_ + c] = v; }
  std::span<const std::uint8_t> row_codes(std::size_t r) const noexcept {
    return {codes_.data() + r * cols_, cols_};
  }

  /// B_i for i in 1..k.
  BinaryMatrix plane(int i) const;

  friend bool operator==(const GroupPlanes&, const GroupPlanes&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  int k_ = 0;
  std::vector<std::uint8_t> codes_;
};

/// Per-row min/max affine quantizer to 0..255, rounding half away from zero.
/// A row with max == min gets scale 1 and all-zero codes.
IntCodes rtn_int8(const Tensor2D& group);

/// P_0..P_7 with sum_i 2^i P_i = z.
std::array<BinaryMatrix, 8> bit_plane_decompose(const IntCodes& codes);

/// B_i = P_{7-k+i}, i = 1..k; the 8-k least significant planes are dropped.
GroupPlanes select_msb_planes(const std::array<BinaryMatrix, 8>& planes, int k);

/// q = design_r . c_r for every row.
Tensor2D reconstruct_group(const GroupPlanes& planes, const Tensor2D& coeffs);

struct GroupInit {
  GroupPlanes planes;
  Tensor2D coeffs;  // d_out x (k+1)
  Tensor2D q;       // d_out x g
  Tensor2D e;       // d_out x g, (snapshot - q) U_loc^-1
};

/// Initial variable grid: 8-bit RTN, keep the k MSB planes, then fit each
/// row's coefficients by wls_fit against the snapshot.
GroupInit init_group(const Tensor2D& snapshot, const Tensor2D& u_loc, int k, double alpha);

}  // namespace bpdq
