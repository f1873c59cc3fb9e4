#include "bpdq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bpdq/error.hpp"

namespace bpdq {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kNonFinite: return "non-finite";
    case ErrorKind::kSingular: return "singular";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kOracleSize: return "oracle size";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::kDimension, "tensor payload has " + std::to_string(data_.size()) +
                                           " values, shape needs " +
                                           std::to_string(rows_ * cols_));
  }
}

Tensor2D Tensor2D::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t nr = rows.size();
  const std::size_t nc = nr == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(nr * nc);
  for (const auto& r : rows) {
    if (r.size() != nc) throw Error(ErrorKind::kDimension, "ragged row list");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor2D(nr, nc, std::move(data));
}

Tensor2D Tensor2D::identity(std::size_t n) {
  Tensor2D t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::vector<double> Tensor2D::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Tensor2D Tensor2D::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) {
    throw Error(ErrorKind::kDimension, "block out of range");
  }
  Tensor2D out(nr, nc);
  for (std::size_t r = 0; r < nr; ++r) {
    const auto src = row(r0 + r).subspan(c0, nc);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

void Tensor2D::set_block(std::size_t r0, std::size_t c0, const Tensor2D& src) {
  if (r0 + src.rows() > rows_ || c0 + src.cols() > cols_) {
    throw Error(ErrorKind::kDimension, "block out of range");
  }
  for (std::size_t r = 0; r < src.rows(); ++r) {
    const auto s = src.row(r);
    std::copy(s.begin(), s.end(), row(r0 + r).begin() + static_cast<std::ptrdiff_t>(c0));
  }
}

Tensor2D Tensor2D::transpose() const {
  Tensor2D out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

bool Tensor2D::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

template <typename Op>
Tensor2D elementwise(const Tensor2D& a, const Tensor2D& b, Op op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::kDimension, "elementwise shape mismatch");
  }
  Tensor2D out(a.rows(), a.cols());
  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = op(av[i], bv[i]);
  return out;
}

}  // namespace

Tensor2D operator-(const Tensor2D& a, const Tensor2D& b) {
  return elementwise(a, b, [](double x, double y) { return x - y; });
}

Tensor2D operator+(const Tensor2D& a, const Tensor2D& b) {
  return elementwise(a, b, [](double x, double y) { return x + y; });
}

double squared_norm(const Tensor2D& t) noexcept {
  double acc = 0.0;
  for (double v : t.values()) acc += v * v;
  return acc;
}

double frobenius_norm(const Tensor2D& t) noexcept { return std::sqrt(squared_norm(t)); }

}  // namespace bpdq
