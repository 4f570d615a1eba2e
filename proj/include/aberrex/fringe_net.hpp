#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aberrex/image.hpp"
#include "aberrex/kernels.hpp"

namespace aberrex {

/// Named float tensor as stored in an FTBW file.
struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const;
};

/// FTBW layout, all integers little-endian:
///   "FTBW" | u32 version | u32 tensor count |
///   per tensor: u16 name length, UTF-8 name, u8 rank, u32 dims[rank],
///               f32 payload (row-major).
inline constexpr std::uint32_t kFtbwVersion = 1;

std::vector<Tensor> read_ftbw(const std::filesystem::path& path);
void write_ftbw(const std::filesystem::path& path, const std::vector<Tensor>& tensors);

/// One row of the layer table. Tags are 1-based; kind is CBR (conv, batch
/// norm, ReLU), Add (sum with the output of tag `source`) or C (plain conv).
struct LayerSpec {
  enum class Kind { cbr, add, conv };
  int tag;
  Kind kind;
  int out_channels;
  int in_channels;
  int source;
};

/// The fixed 11-node graph: CBR 16x2, 32x16, 64x32, 64x64, 64x64, Add 3,
/// CBR 32x64, Add 2, CBR 16x32, Add 1, C 1x16.
const std::vector<LayerSpec>& fringe_net_layers();

/// Learnable parameter count of the graph: conv weights and biases plus
/// batch-norm scale and shift.
std::size_t fringe_net_parameter_count();

/// Validated weights: conv{t}.w / conv{t}.b for every conv tag and
/// bn{t}.gamma / .beta / .mean / .var (optional scalar bn{t}.eps, default
/// 1e-5) for every CBR tag.
class FringeNetWeights {
 public:
  /// Throws InvalidInput naming the offending tensor on any mismatch.
  explicit FringeNetWeights(std::vector<Tensor> tensors);
  static FringeNetWeights load(const std::filesystem::path& path);

  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }
  const Tensor& get(const std::string& name) const;
  std::size_t parameter_count() const;

 private:
  std::vector<Tensor> tensors_;
};

/// Inference engine with batch norm folded into per-channel affine terms.
class FringeNet {
 public:
  explicit FringeNet(const FringeNetWeights& weights);

  /// Residual phi(z_c, z_G). Planes must match and be at least 8x8.
  Plane forward(const Plane& zc, const Plane& zg) const;
  /// Same graph through the naive serial convolution.
  Plane forward_reference(const Plane& zc, const Plane& zg) const;

  /// clamp(z_c - phi(z_c, z_G), 0, 1).
  Plane correct_channel(const Plane& zc, const Plane& zg) const;
  /// [u_R, z_G, u_B] with red and blue corrected by the same network.
  PlanarImage correct(const PlanarImage& z) const;

 private:
  struct FoldedConv {
    int out_channels;
    int in_channels;
    std::vector<float> weights;
    std::vector<float> scale;
    std::vector<float> shift;
    bool relu;
  };

  template <typename ConvFn>
  Plane run(const Plane& zc, const Plane& zg, ConvFn conv) const;

  std::vector<FoldedConv> convs_;  ///< indexed by tag - 1; empty for Add tags
};

/// All-zero weights with unit batch-norm variance: phi == 0.
FringeNetWeights zero_fringe_weights();

}  // namespace aberrex
