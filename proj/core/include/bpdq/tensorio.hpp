#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "bpdq/tensor.hpp"

namespace bpdq {

// TNSR container, little-endian:
//   "TNSR" | u32 version=1 | u8 dtype (0=f64, 1=f32) | u8 rank=2 | u64 rows | u64 cols | payload
inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 26;

enum class TensorDtype : std::uint8_t { kFloat64 = 0, kFloat32 = 1 };

void save_tensor(const Tensor2D& t, const std::filesystem::path& path,
                 TensorDtype dtype = TensorDtype::kFloat64);

/// Throws Error with kind kIo, kFormat, kTruncated or kNonFinite.
Tensor2D load_tensor(const std::filesystem::path& path);

struct SynthLayer {
  Tensor2D weights;      // d_out x d_in, standard normal
  Tensor2D activations;  // d_in x n_samples
};

/// Deterministic synthetic layer. Each input channel of X gets a scale
/// (1-u)^(-tail_index) with u uniform, so tail_index=0 gives unit scales and
/// larger values produce Pareto-tailed outlier channels.
SynthLayer synth_layer(std::uint64_t seed, std::size_t d_out, std::size_t d_in,
                       std::size_t n_samples, double tail_index);

/// Per-channel scales used by synth_layer for the same arguments.
std::vector<double> synth_channel_scales(std::uint64_t seed, std::size_t d_in, double tail_index);

/// Portable normal/uniform stream over mt19937_64 (std distributions are not
/// reproducible across standard libraries).
class SeededNormal {
 public:
  explicit SeededNormal(std::uint64_t seed);
  double uniform();  // [0, 1)
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bpdq
