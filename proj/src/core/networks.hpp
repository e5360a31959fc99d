#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "latent.hpp"

namespace mulgan {

struct ModelConfig {
  int image_size = 32;
  int n_attrs = 3;
  int down_layers = 4;    // stride-2 layers in the encoder (and decoder)
  int base_channels = 32;
  int max_channels = 512;
  int critic_layers = 6;
  int critic_base_channels = 0;  // 0: same as base_channels
};

void validate(const ModelConfig& cfg);

/// Output widths of the encoder's down-sampling layers. Layer i has
/// min(base * 2^i, max) channels; the last one is rounded up to a multiple
/// of 2 * n_attrs so the latent splits into equal halves and equal blocks.
std::vector<int64_t> encoder_widths(const ModelConfig& cfg);
int64_t latent_channels(const ModelConfig& cfg);
int64_t latent_spatial(const ModelConfig& cfg);

struct CriticLayout {
  std::vector<int64_t> widths;
  std::vector<int> strides;  // 2 while the map is even and larger than 1, then 1
  int64_t final_spatial = 0;
};
CriticLayout critic_layout(const ModelConfig& cfg);

/// Probability clamp applied before logarithms.
inline constexpr double kProbEps = 1e-7;

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& images);

 private:
  torch::nn::Sequential net_{nullptr};
};
TORCH_MODULE(Encoder);

class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& latent);

 private:
  torch::nn::Sequential net_{nullptr};
};
TORCH_MODULE(Decoder);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const ModelConfig& cfg);

  /// (N,3,S,S) -> raw latent (N,C,S/2^d,S/2^d).
  torch::Tensor encode(const torch::Tensor& images);
  /// Raw or assembled latent -> images in [-1,1].
  torch::Tensor decode(const torch::Tensor& latent);
  torch::Tensor decode(const FilteredLatent& latent) { return decode(latent.concat()); }

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  Encoder encoder_{nullptr};
  Decoder decoder_{nullptr};
};
TORCH_MODULE(Generator);

struct CriticOutput {
  torch::Tensor scores;  // (N) unbounded
  torch::Tensor probs;   // (N,n_attrs) clamped to [eps, 1-eps]
};

/// Critic and attribute classifier: one convolutional backbone, two
/// fully-connected heads. Only the classifier head is squashed.
class CriticImpl : public torch::nn::Module {
 public:
  explicit CriticImpl(const ModelConfig& cfg);

  torch::Tensor features(const torch::Tensor& images);
  torch::Tensor score(const torch::Tensor& images);
  torch::Tensor classify(const torch::Tensor& images);
  CriticOutput forward(const torch::Tensor& images);

  CriticOutput heads(const torch::Tensor& features);

 private:
  ModelConfig cfg_;
  torch::nn::Sequential backbone_{nullptr};
  torch::nn::Linear score_head_{nullptr};
  torch::nn::Linear attr_head_{nullptr};
};
TORCH_MODULE(Critic);

/// The full set of learnable functions plus the config that shaped them.
struct MulGanModel {
  ModelConfig config;
  Generator generator{nullptr};
  Critic critic{nullptr};

  /// Builds with deterministic initialization from `seed`.
  static MulGanModel build(const ModelConfig& cfg, std::uint64_t seed);

  /// Named parameters prefixed "generator." and "critic.".
  std::vector<std::pair<std::string, torch::Tensor>> named_parameters() const;
  void to(torch::Dtype dtype);
  void set_train(bool on);
};

/// Hash of parameter bytes, used to verify which networks an update touched.
std::uint64_t parameter_hash(const std::vector<torch::Tensor>& params);

}  // namespace mulgan
