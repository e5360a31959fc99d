#pragma once

#include <torch/torch.h>

#include <utility>
#include <vector>

#include "dataset.hpp"

namespace mulgan {

/// Encoder output split along channels into n attribute blocks followed by
/// the attribute-irrelevant half. Tensors are (N,c,h,w) or unbatched (c,h,w);
/// the channel axis is always dim()-3.
struct LatentCode {
  std::vector<torch::Tensor> blocks;
  torch::Tensor irrelevant;

  int n_attrs() const { return static_cast<int>(blocks.size()); }
  /// [blocks..., irrelevant] along channels; inverse of split().
  torch::Tensor concat() const;
};

/// A code whose blocks have been multiplied by binary labels. `labels` is
/// (N,n) for batched codes or (n) for a single code.
struct FilteredLatent {
  LatentCode code;
  torch::Tensor labels;

  torch::Tensor concat() const { return code.concat(); }
};

enum class MixMode { Replace, Mix };

/// Checks the split precondition for a channel count; throws ConfigError.
void check_split_channels(int64_t channels, int n_attrs);

LatentCode split(const torch::Tensor& raw, int n_attrs);

/// Label tensor for `code`: accepts (n) or (N,n); validates binary values
/// and returns the layout matching the code's batch dimension.
torch::Tensor label_tensor_for(const LatentCode& code, const torch::Tensor& labels, const char* what);

FilteredLatent filter(const LatentCode& code, const torch::Tensor& labels);
FilteredLatent filter(const LatentCode& code, const AttributeVector& labels);

/// Z_C = [exemplar blocks, src irrelevant], Z_D = [src blocks, exemplar irrelevant].
std::pair<FilteredLatent, FilteredLatent> swap(const FilteredLatent& src, const FilteredLatent& exemplar);

/// Selective transfer. Selected blocks (mask_i = 1) become ex_labels_i * b_i.
/// Unselected blocks are zero in Replace mode and src_labels_i * a_i in Mix
/// mode. The irrelevant part is always the source's.
FilteredLatent mix(const LatentCode& src, const torch::Tensor& src_labels, const LatentCode& exemplar,
                   const torch::Tensor& ex_labels, const torch::Tensor& mask, MixMode mode);

MixMode parse_mix_mode(const std::string& s);
const char* to_string(MixMode m);

}  // namespace mulgan
