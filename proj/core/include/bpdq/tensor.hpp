#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace bpdq {

/// Dense row-major matrix of doubles. Holds weights (d_out x d_in),
/// calibration activations (d_in x N) and every intermediate block.
class Tensor2D {
 public:
  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2D from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2D identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::vector<double> column(std::size_t c) const;

  /// Copy of the nr x nc block starting at (r0, c0).
  Tensor2D block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  void set_block(std::size_t r0, std::size_t c0, const Tensor2D& src);

  Tensor2D transpose() const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor2D& a, const Tensor2D& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Tensor2D operator-(const Tensor2D& a, const Tensor2D& b);
Tensor2D operator+(const Tensor2D& a, const Tensor2D& b);

double squared_norm(const Tensor2D& t) noexcept;
double frobenius_norm(const Tensor2D& t) noexcept;

}  // namespace bpdq
