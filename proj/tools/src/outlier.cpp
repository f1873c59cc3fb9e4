#include "outlier.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "bpdq/error.hpp"

namespace bpdq::app {

OutlierStats outlier_stats(const Tensor2D& x) {
  if (x.rows() == 0 || x.cols() == 0) {
    throw Error(ErrorKind::kPrecondition, "outlier_stats needs at least one channel and one sample");
  }
  std::vector<double> m(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    for (double v : x.row(i)) acc += std::abs(v);
    m[i] = acc / static_cast<double>(x.cols());
  }
  std::vector<double> sorted = m;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[(sorted.size() - 1) / 2];
  if (!(median > 0.0)) {
    throw Error(ErrorKind::kPrecondition, "outlier_stats: median channel magnitude is zero");
  }
  OutlierStats s;
  s.diagr = sorted.back() / median;
  s.cnt10 = std::count_if(m.begin(), m.end(), [&](double v) { return v > 10.0 * median; });
  return s;
}

double percentile95(std::span<const double> values) {
  if (values.empty()) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  return sorted[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace bpdq::app
