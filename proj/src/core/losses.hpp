#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <string>

namespace mulgan {

enum class RecNorm { L1, L2 };

struct LossWeights {
  double lambda_g = 10.0;
  double lambda_rec = 100.0;
  double lambda_gp = 10.0;
};

void validate(const LossWeights& w);

/// Mean absolute (L1) or mean squared (L2) difference over all elements.
torch::Tensor reconstruction_loss(const torch::Tensor& a, const torch::Tensor& a1, RecNorm norm = RecNorm::L1);

/// Batch mean of the per-image sum over attributes of binary cross-entropy.
torch::Tensor attr_cls_loss(const torch::Tensor& probs, const torch::Tensor& targets);

/// -E[D(A)] - E[D(B)] + E[D(A2)] + E[D(B2)]
torch::Tensor adv_loss_d(const torch::Tensor& d_a, const torch::Tensor& d_b, const torch::Tensor& d_a2,
                         const torch::Tensor& d_b2);

/// -E[D(A2)] - E[D(B2)]
torch::Tensor adv_loss_g(const torch::Tensor& d_a2, const torch::Tensor& d_b2);

using CriticFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// Mean over the batch of (||grad_x D(x)||_2 - 1)^2 at x = e*real + (1-e)*fake,
/// e ~ U[0,1) per sample drawn from a generator seeded with `seed`. The
/// result stays differentiable with respect to the critic's parameters.
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               std::uint64_t seed);

/// Scalar loss components as measured during one training step.
struct LossComponents {
  double rec = 0;
  double cls_g = 0;
  double cls_c = 0;
  double adv_g = 0;
  double adv_d = 0;
  double gp = 0;
};

struct LossReport {
  LossComponents parts;
  double total_g = 0;  // adv_g + lambda_g*cls_g + lambda_rec*rec
  double total_d = 0;  // adv_d + lambda_gp*gp
  double total_c = 0;  // cls_c
};

LossReport total_losses(const LossComponents& c, const LossWeights& w);

/// Returns the name of the first non-finite entry ("L_rec", ...) or "".
std::string first_non_finite(const LossReport& r);

}  // namespace mulgan
