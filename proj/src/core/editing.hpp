#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "dataset.hpp"
#include "latent.hpp"
#include "networks.hpp"

namespace mulgan {

/// Inference-time editing over a trained generator. Images may be a single
/// (3,S,S) image or a (N,3,S,S) batch; labels and masks are (n) or (N,n).
class Editor {
 public:
  explicit Editor(MulGanModel model);

  /// decode([filter(a, labels), z_a]), the direct reconstruction path.
  torch::Tensor reconstruct(const torch::Tensor& image, const torch::Tensor& labels);

  /// decode(mix(code(source), code(exemplar), mask, mode)). Source labels are
  /// only read in Mix mode. Selecting an attribute the exemplar lacks zeroes
  /// that block (removal); a warning is appended for each such selection.
  torch::Tensor transfer(const torch::Tensor& source, const torch::Tensor& exemplar, const torch::Tensor& src_labels,
                         const torch::Tensor& ex_labels, const torch::Tensor& mask, MixMode mode,
                         std::vector<std::string>* warnings = nullptr);

  /// Transfer of two or more attributes in one decoder pass.
  torch::Tensor multi_transfer(const torch::Tensor& source, const torch::Tensor& exemplar,
                               const torch::Tensor& src_labels, const torch::Tensor& ex_labels,
                               const torch::Tensor& mask, MixMode mode = MixMode::Mix,
                               std::vector<std::string>* warnings = nullptr);

  /// Classifier-head predictions, thresholded at 0.5.
  torch::Tensor predict_labels(const torch::Tensor& image);

  /// Latent fed to the decoder by transfer(), for inspection.
  FilteredLatent transfer_latent(const torch::Tensor& source, const torch::Tensor& exemplar,
                                 const torch::Tensor& src_labels, const torch::Tensor& ex_labels,
                                 const torch::Tensor& mask, MixMode mode);

  torch::Tensor encode(const torch::Tensor& image);

  MulGanModel& model() { return model_; }
  const ModelConfig& config() const { return model_.config; }

 private:
  MulGanModel model_;
};

}  // namespace mulgan
