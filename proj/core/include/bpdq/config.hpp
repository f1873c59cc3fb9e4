#pragma once

#include <cstddef>
#include <cstdint>

namespace bpdq {

/// Parameters of a layer solve. Defaults follow the reference setup:
/// ten refinement rounds and a 1e-4 ridge on the coefficient fit.
struct RunConfig {
  int k = 2;               // bit-planes per weight, 1..8
  std::size_t g = 64;      // group size along d_in
  int iters = 10;          // refinement rounds after initialization
  double alpha = 1e-4;     // ridge added to the coefficient Gram matrix
  double percdamp = 0.01;  // Hessian damping relative to mean diagonal
  std::uint64_t seed = 0;
  int coeff_bits = 16;     // 16, 32 or 64

  /// Throws Error(kConfig) naming the offending values.
  void validate(std::size_t d_in) const;
};

}  // namespace bpdq
