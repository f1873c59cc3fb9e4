#include "bpdq/bpd.hpp"

#include <algorithm>
#include <cmath>

#include "bpdq/error.hpp"
#include "bpdq/grid.hpp"
#include "bpdq/linalg.hpp"

namespace bpdq {

GroupPlanes::GroupPlanes(std::size_t rows, std::size_t cols, int k)
    : rows_(rows), cols_(cols), k_(k), codes_(rows * cols, 0) {
  if (k < 1 || k > 8) throw Error(ErrorKind::kPrecondition, "plane count must be in 1..8");
}

BinaryMatrix GroupPlanes::plane(int i) const {
  if (i < 1 || i > k_) throw Error(ErrorKind::kPrecondition, "plane index out of range");
  BinaryMatrix b{rows_, cols_, std::vector<std::uint8_t>(codes_.size())};
  for (std::size_t n = 0; n < codes_.size(); ++n) b.bits[n] = (codes_[n] >> (i - 1)) & 1u;
  return b;
}

IntCodes rtn_int8(const Tensor2D& group) {
  IntCodes out{group.rows(), group.cols(), std::vector<std::uint8_t>(group.size()),
               std::vector<double>(group.rows()), std::vector<double>(group.rows())};
  for (std::size_t r = 0; r < group.rows(); ++r) {
    const auto row = group.row(r);
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    const double wmin = *lo;
    const double range = *hi - *lo;
    out.wmin[r] = wmin;
    out.scale[r] = range > 0.0 ? range / 255.0 : 1.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      // (w - min) / range * 255 keeps exact midpoints such as 127.5 exact.
      const double t = range > 0.0 ? (row[c] - wmin) / range * 255.0 : 0.0;
      out.z[r * out.cols + c] = static_cast<std::uint8_t>(std::clamp(std::round(t), 0.0, 255.0));
    }
  }
  return out;
}

std::array<BinaryMatrix, 8> bit_plane_decompose(const IntCodes& codes) {
  std::array<BinaryMatrix, 8> planes;
  for (int i = 0; i < 8; ++i) {
    planes[i] = BinaryMatrix{codes.rows, codes.cols, std::vector<std::uint8_t>(codes.z.size())};
    for (std::size_t n = 0; n < codes.z.size(); ++n) planes[i].bits[n] = (codes.z[n] >> i) & 1u;
  }
  return planes;
}

GroupPlanes select_msb_planes(const std::array<BinaryMatrix, 8>& planes, int k) {
  GroupPlanes out(planes[0].rows, planes[0].cols, k);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      std::uint8_t code = 0;
      for (int i = 1; i <= k; ++i) {
        code |= static_cast<std::uint8_t>(planes[7 - k + i](r, c) << (i - 1));
      }
      out.set_code(r, c, code);
    }
  }
  return out;
}

Tensor2D reconstruct_group(const GroupPlanes& planes, const Tensor2D& coeffs) {
  Tensor2D q(planes.rows(), planes.cols());
  for (std::size_t r = 0; r < planes.rows(); ++r) {
    const auto c = coeffs.row(r);
    for (std::size_t j = 0; j < planes.cols(); ++j) q(r, j) = level_value(c, planes.code(r, j));
  }
  return q;
}

GroupInit init_group(const Tensor2D& snapshot, const Tensor2D& u_loc, int k, double alpha) {
  if (u_loc.rows() != snapshot.cols() || u_loc.cols() != snapshot.cols()) {
    throw Error(ErrorKind::kDimension, "init_group: U_loc must be g x g");
  }
  GroupInit init;
  init.planes = select_msb_planes(bit_plane_decompose(rtn_int8(snapshot)), k);
  init.coeffs = Tensor2D(snapshot.rows(), static_cast<std::size_t>(k) + 1);
  for (std::size_t r = 0; r < snapshot.rows(); ++r) {
    const auto c = wls_fit(make_design(init.planes.row_codes(r), k), snapshot.row(r), u_loc, alpha);
    std::copy(c.begin(), c.end(), init.coeffs.row(r).begin());
  }
  init.q = reconstruct_group(init.planes, init.coeffs);
  init.e = solve_right_upper(snapshot - init.q, u_loc);
  return init;
}

}  // namespace bpdq
