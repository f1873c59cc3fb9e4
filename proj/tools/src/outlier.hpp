#pragma once

#include <cstdint>
#include <span>

#include "bpdq/tensor.hpp"

namespace bpdq::app {

struct OutlierStats {
  double diagr = 0.0;
  std::int64_t cnt10 = 0;
};

/// Channel magnitude m_i = mean_j |x(i, j)|; diagr = max(m) / median(m) and
/// cnt10 = #{i : m_i > 10 * median(m)}. An even count takes the lower-middle
/// element as the median. Throws Error(kPrecondition) when the median is 0.
OutlierStats outlier_stats(const Tensor2D& x);

/// Nearest-rank 95th percentile.
double percentile95(std::span<const double> values);

}  // namespace bpdq::app
