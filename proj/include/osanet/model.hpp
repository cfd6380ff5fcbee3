#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "osanet/adam.hpp"
#include "osanet/layers.hpp"
#include "osanet/rng.hpp"
#include "osanet/tensor.hpp"

namespace osanet::nn {

struct ConvBlockSpec {
  std::size_t filters = 1;
  std::size_t conv_kernel = 1;
  std::size_t conv_stride = 1;
  std::size_t pool_window = 1;
  std::size_t pool_stride = 1;
};

struct ModelConfig {
  std::vector<ConvBlockSpec> blocks;
  std::size_t hidden_units = 100;
  float dropout_keep = 0.5f;
  std::size_t num_classes = 4;
};

// Three conv-pool blocks: 46/k10/s2 + pool 10/2, 92/k10/s2 + pool 10/2,
// 184/k20/s2 + pool 20/5. Needs seq_len >= 1048.
ModelConfig full_architecture();

// Two small blocks for short desk-scale segments (seq_len >= 50 or so).
ModelConfig compact_architecture();

using Tensor2f = Tensor2<float>;
using Tensor3f = Tensor3<float>;

// Fixed-topology stack: [conv -> maxpool] x B -> flatten -> dense(ReLU) ->
// dropout -> dense(num_classes). Softmax lives in the loss.
class Model {
 public:
  // Shape-validates the whole chain and He-initializes weights (seeded
  // uniform in +/- sqrt(6 / fan_in)); biases start at zero.
  static Model build(std::size_t seq_len, std::size_t in_channels, const ModelConfig& config,
                     std::uint64_t seed);

  std::size_t seq_len() const { return seq_len_; }
  std::size_t in_channels() const { return in_channels_; }
  const ModelConfig& config() const { return config_; }
  std::size_t flatten_width() const { return flatten_width_; }

  // Per-layer output lengths through the conv/pool chain, conv_i then pool_i.
  std::vector<std::size_t> chain_lengths() const;

  // Evaluation-mode forward (dropout is the identity). Returns logits.
  Tensor2f forward(const Tensor3f& x) const;

  // Everything backward() needs, captured during a training forward pass.
  struct TrainCache {
    std::vector<Tensor3f> conv_in;
    std::vector<Tensor3f> conv_out;
    std::vector<std::vector<std::uint32_t>> pool_argmax;
    std::vector<Tensor3f> pool_out;
    Tensor2f hidden_in;
    Tensor2f hidden_out;
    std::vector<float> dropout_mask;
    Tensor2f dropout_out;
    Tensor2f logits;
  };

  Tensor2f forward_train(const Tensor3f& x, SplitMix64& rng, TrainCache& cache) const;

  // Gradient arrays ordered like parameters().
  std::vector<std::vector<float>> backward(const TrainCache& cache,
                                           const Tensor2f& grad_logits) const;

  // conv0 w, conv0 b, ..., hidden w, hidden b, classifier w, classifier b.
  std::vector<std::span<float>> parameters();
  std::vector<std::span<const float>> parameters() const;
  std::vector<std::size_t> parameter_sizes() const;

  const std::vector<Conv1d<float>>& convs() const { return convs_; }
  const Dense<float>& hidden() const { return hidden_; }
  const Dense<float>& classifier() const { return classifier_; }

  // Training-time override; evaluation ignores dropout either way.
  void set_dropout_keep(float keep);

 private:
  std::size_t seq_len_ = 0;
  std::size_t in_channels_ = 0;
  std::size_t flatten_width_ = 0;
  ModelConfig config_;
  std::vector<Conv1d<float>> convs_;
  std::vector<MaxPool1d<float>> pools_;
  Dense<float> hidden_;
  Dense<float> classifier_;
  Dropout<float> dropout_{1.0f};

  friend struct CheckpointCodec;
};

Model build_model(std::size_t seq_len, std::size_t in_channels,
                  const ModelConfig& config = full_architecture(), std::uint64_t seed = 1);

// Checkpoint container: magic "OSNMODL1", architecture descriptor, float32
// parameter blobs, optional Adam state (moments + step).
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdamState<float>* adam = nullptr);

struct Checkpoint {
  Model model;
  std::optional<AdamState<float>> adam;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace osanet::nn
