#include "losses.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "errors.hpp"
#include "networks.hpp"

namespace mulgan {

void validate(const LossWeights& w) {
  if (!(w.lambda_g >= 0) || !(w.lambda_rec >= 0) || !(w.lambda_gp >= 0))
    throw ConfigError("loss weights must be non-negative");
}

torch::Tensor reconstruction_loss(const torch::Tensor& a, const torch::Tensor& a1, RecNorm norm) {
  if (!a.sizes().equals(a1.sizes())) throw ShapeError("reconstruction_loss: image shapes differ");
  auto diff = a - a1;
  return norm == RecNorm::L1 ? diff.abs().mean() : diff.square().mean();
}

torch::Tensor attr_cls_loss(const torch::Tensor& probs, const torch::Tensor& targets) {
  if (probs.dim() != 2 || !probs.sizes().equals(targets.sizes()))
    throw ShapeError("attr_cls_loss: probs and targets must both be (N,n_attrs)");
  if (!torch::isfinite(probs).all().item<bool>()) throw NumericalError("attr_cls_loss: non-finite probabilities");
  auto p = probs.clamp(kProbEps, 1.0 - kProbEps);
  auto t = targets.to(p.dtype());
  auto bce = -(t * torch::log(p) + (1 - t) * torch::log(1 - p));
  return bce.sum(1).mean();
}

torch::Tensor adv_loss_d(const torch::Tensor& d_a, const torch::Tensor& d_b, const torch::Tensor& d_a2,
                         const torch::Tensor& d_b2) {
  return -d_a.mean() - d_b.mean() + d_a2.mean() + d_b2.mean();
}

torch::Tensor adv_loss_g(const torch::Tensor& d_a2, const torch::Tensor& d_b2) { return -d_a2.mean() - d_b2.mean(); }

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               std::uint64_t seed) {
  if (!real.sizes().equals(fake.sizes())) throw ShapeError("gradient_penalty: real and fake shapes differ");
  auto gen = at::detail::createCPUGenerator(seed);
  std::vector<int64_t> eshape(static_cast<size_t>(real.dim()), 1);
  eshape[0] = real.size(0);
  auto eps = torch::rand(eshape, gen, torch::TensorOptions().dtype(real.dtype()));
  auto x = (eps * real.detach() + (1 - eps) * fake.detach()).requires_grad_(true);
  auto d = critic(x);
  torch::Tensor grad;
  if (d.requires_grad())
    grad = torch::autograd::grad({d.sum()}, {x}, {}, /*retain_graph=*/true, /*create_graph=*/true,
                                 /*allow_unused=*/true)[0];
  if (!grad.defined()) grad = torch::zeros_like(x);  // critic independent of its input
  auto norm = grad.flatten(1).norm(2, 1);
  return (norm - 1).square().mean();
}

LossReport total_losses(const LossComponents& c, const LossWeights& w) {
  LossReport r;
  r.parts = c;
  r.total_g = c.adv_g + w.lambda_g * c.cls_g + w.lambda_rec * c.rec;
  r.total_d = c.adv_d + w.lambda_gp * c.gp;
  r.total_c = c.cls_c;
  return r;
}

std::string first_non_finite(const LossReport& r) {
  const std::pair<const char*, double> items[] = {
      {"L_rec", r.parts.rec},     {"L_cls_g", r.parts.cls_g}, {"L_cls_c", r.parts.cls_c},
      {"L_adv_g", r.parts.adv_g}, {"L_adv_d", r.parts.adv_d}, {"gradient_penalty", r.parts.gp},
      {"L_G", r.total_g},         {"L_D", r.total_d},         {"L_C", r.total_c}};
  for (const auto& [name, v] : items)
    if (!std::isfinite(v)) return name;
  return "";
}

}  // namespace mulgan
