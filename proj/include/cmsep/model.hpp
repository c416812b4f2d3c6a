#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cmsep/autograd.hpp"
#include "cmsep/checkpoint.hpp"
#include "cmsep/masking.hpp"

namespace cmsep::model {

// Declarative architecture. 9 dense blocks, 4 down / 4 up, 4 layers of 3x3
// per block; `growth` and `reorg_channels` default small for CPU training.
struct ModelConfig {
  static constexpr int kVersion = 1;

  int num_dense_blocks = 9;
  int layers_per_block = 4;
  int kernel_size = 3;
  int growth = 8;
  int num_down = 4;
  int num_up = 4;
  int attention_channel_divisor = 8;
  // 0 selects C'*F/2 at each module's scale.
  int attention_embed = 0;
  // Dense-block indices (0 .. num_dense_blocks-1, encoder first) followed by
  // an attention module. Empty selects the two deepest encoder and the two
  // deepest decoder scales.
  std::vector<int> attention_blocks;
  int reorg_channels = 16;
  int input_channels = 2;
  int num_sources = 2;
  // Frequency bins of the spectrograms this net consumes (window/2 + 1).
  int freq_bins = 513;
  // Divide the input by its RMS before the first layer.
  bool normalize_input = true;

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  std::vector<int> resolved_attention_blocks() const;
  // Frequency extent after padding to a multiple of 2^num_down.
  int padded_bins() const;
  int padded_frames(int frames) const;

  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
  static ModelConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct ConvLayer {
  ag::Tensor<T> weight;  // [out, in, k, k]
  ag::Tensor<T> bias;    // [out]
  kernels::Padding padding = kernels::Padding::Same;

  ag::Tensor<T> operator()(const ag::Tensor<T>& x) const {
    return ag::conv2d(x, weight, bias, 1, padding);
  }
};

// Layer i consumes concat(x_{i-1}, ..., x_0) and applies conv + ELU. All
// layers but the last use SAME padding; the last uses VALID, and the block
// output is that layer's output, zero padded back to the input extent.
template <typename T>
struct DenseBlock {
  std::size_t in_channels = 0;
  std::vector<ConvLayer<T>> layers;

  // Output before the re-pad; exposed for shape tests.
  ag::Tensor<T> forward_unpadded(const ag::Tensor<T>& x) const;
  ag::Tensor<T> forward(const ag::Tensor<T>& x) const;
  std::size_t out_channels() const { return layers.back().weight.dim(0); }
};

// Self-attention over time frames. Output is concat(x, attended) along
// channels, so channel count doubles.
template <typename T>
struct AttentionModule {
  std::size_t channels = 0;
  std::size_t reduced_channels = 0;
  std::size_t bins = 0;
  std::size_t embed = 0;
  ConvLayer<T> query_conv, key_conv, value_conv;
  ag::Tensor<T> query_proj;  // [E, C'*F]
  ag::Tensor<T> key_proj;    // [E, C'*F]

  // `beta`, when non-null, receives the T x T attention map (rows sum to 1).
  ag::Tensor<T> forward(const ag::Tensor<T>& x, ag::Tensor<T>* beta = nullptr) const;
};

template <typename T>
struct Upsample {
  ConvLayer<T> conv;  // 3x3 SAME after nearest-neighbour doubling
  ag::Tensor<T> forward(const ag::Tensor<T>& x) const;
};

template <typename T>
ag::Tensor<T> downsample(const ag::Tensor<T>& x) {
  return ag::avg_pool2(x);
}

// Raw head outputs, each [1, F, T]. For complex-mask targets these are the
// real/imaginary mask components; for direct mapping they are spectra in
// normalized units (multiply by `input_scale`).
template <typename T>
struct HeadOutputs {
  ag::Tensor<T> voice_real, voice_imag, acc_real, acc_imag;
  T input_scale = T(1);
};

template <typename T>
class SADenseUNet {
 public:
  SADenseUNet(ModelConfig config, std::uint64_t seed);

  // input: [2, F, T] with F == config.freq_bins and any T >= 1.
  HeadOutputs<T> forward(const ag::Tensor<T>& input,
                         std::vector<ag::Tensor<T>>* attention_maps = nullptr) const;

  // Masks from a spectrogram: inference path without gradient tracking.
  std::pair<ComplexMask, ComplexMask> estimate_masks(const ComplexSpectrogram& mixture) const;

  const ModelConfig& config() const { return config_; }
  std::vector<NamedParameter<T>> parameters() const;
  std::vector<ag::Tensor<T>> parameter_tensors() const;
  std::size_t parameter_count() const;

  // Module access for tests and diagnostics.
  const std::vector<DenseBlock<T>>& dense_blocks() const { return blocks_; }
  const std::vector<AttentionModule<T>>& attention_modules() const { return attention_; }
  // For each dense block, index into attention_modules() or -1.
  const std::vector<int>& attention_slots() const { return attention_slot_; }
  std::vector<ConvLayer<T>*> head_layers();

 private:
  ModelConfig config_;
  std::vector<DenseBlock<T>> blocks_;
  std::vector<AttentionModule<T>> attention_;
  std::vector<int> attention_slot_;
  std::vector<Upsample<T>> upsamplers_;
  ConvLayer<T> reorg_;
  ConvLayer<T> heads_[4];
};

// Builds the [2, F, T] input tensor (real, imag channels).
template <typename T>
ag::Tensor<T> spectrogram_tensor(const ComplexSpectrogram& spec);

// Copies a [1, F, T] (or [F, T]) tensor into a Grid.
template <typename T>
Grid to_grid(const ag::Tensor<T>& t);

// Differentiable cIRM-CS loss: masks are tensors, spectra constants.
template <typename T>
ag::Tensor<T> cirm_cs_loss(const HeadOutputs<T>& heads, const ComplexSpectrogram& mixture,
                           const ComplexSpectrogram& voice, const ComplexSpectrogram& acc);
// Direct complex-spectrum mapping (TCS).
template <typename T>
ag::Tensor<T> tcs_loss(const HeadOutputs<T>& heads, const ComplexSpectrogram& voice,
                       const ComplexSpectrogram& acc);
// Magnitude mapping (TMS); uses the real heads as magnitude estimates.
template <typename T>
ag::Tensor<T> tms_loss(const HeadOutputs<T>& heads, const ComplexSpectrogram& voice,
                       const ComplexSpectrogram& acc);

}  // namespace cmsep::model
