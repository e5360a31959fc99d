#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

#include "dataset.hpp"

namespace mulgan {

/// Maps images to a fixed-length feature vector; used for FID statistics.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int64_t feature_dim() const = 0;
  /// (N,3,S,S) -> (N, feature_dim)
  virtual torch::Tensor extract(const torch::Tensor& images) = 0;
};

class OracleNetImpl : public torch::nn::Module {
 public:
  OracleNetImpl(int image_size, int n_attrs, int feature_dim);
  torch::Tensor features(const torch::Tensor& images);
  torch::Tensor logits_from(const torch::Tensor& features);

 private:
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(OracleNet);

struct OracleOptions {
  int feature_dim = 64;
  int steps = 800;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Attribute classifier trained on real images only, independent of any
/// MulGAN network. Its penultimate layer is the FID feature space.
class Oracle final : public FeatureExtractor {
 public:
  Oracle(int image_size, std::vector<std::string> attribute_names, int feature_dim);

  int64_t feature_dim() const override { return feature_dim_; }
  torch::Tensor extract(const torch::Tensor& images) override;
  /// Per-attribute probabilities (N, n_attrs).
  torch::Tensor predict(const torch::Tensor& images);

  int image_size() const { return image_size_; }
  int n_attrs() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& attribute_names() const { return names_; }
  OracleNet& net() { return net_; }

  void save(const std::filesystem::path& path) const;
  static Oracle load(const std::filesystem::path& path);

 private:
  int image_size_;
  std::vector<std::string> names_;
  int feature_dim_;
  OracleNet net_{nullptr};
};

/// Trains on the source's training split with binary cross-entropy.
Oracle train_oracle(const ImageSource& source, const OracleOptions& opts);

/// Fraction of images (per attribute) whose thresholded prediction matches.
std::vector<double> oracle_accuracy(Oracle& oracle, const ImageSource& source, const std::vector<size_t>& indices);

}  // namespace mulgan
