#include "editing.hpp"

#include "errors.hpp"

namespace mulgan {
namespace {

torch::Tensor batched(const torch::Tensor& image) { return image.dim() == 3 ? image.unsqueeze(0) : image; }

torch::Tensor like_input(const torch::Tensor& out, const torch::Tensor& input) {
  return input.dim() == 3 ? out.squeeze(0) : out;
}

torch::Tensor batched_labels(const torch::Tensor& l, int64_t n) {
  if (!l.defined()) return l;
  return l.dim() == 1 ? l.unsqueeze(0).expand({n, l.size(0)}) : l;
}

}  // namespace

Editor::Editor(MulGanModel model) : model_(std::move(model)) { model_.set_train(false); }

torch::Tensor Editor::encode(const torch::Tensor& image) {
  torch::NoGradGuard ng;
  return model_.generator->encode(batched(image)
      .to(model_.generator->parameters().front().scalar_type()));
}

torch::Tensor Editor::reconstruct(const torch::Tensor& image, const torch::Tensor& labels) {
  torch::NoGradGuard ng;
  auto x = batched(image);
  auto code = split(encode(x), model_.config.n_attrs);
  auto z = filter(code, batched_labels(labels, x.size(0)));
  return like_input(model_.generator->decode(z), image);
}

FilteredLatent Editor::transfer_latent(const torch::Tensor& source, const torch::Tensor& exemplar,
                                       const torch::Tensor& src_labels, const torch::Tensor& ex_labels,
                                       const torch::Tensor& mask, MixMode mode) {
  torch::NoGradGuard ng;
  auto s = batched(source), e = batched(exemplar);
  if (!s.sizes().equals(e.sizes())) throw ShapeError("source and exemplar images have different shapes");
  const int64_t n = s.size(0);
  if (mode == MixMode::Mix && !src_labels.defined())
    throw ValidationError("source labels are required in mix mode");
  const int k = model_.config.n_attrs;
  auto sc = split(encode(s), k);
  auto ec = split(encode(e), k);
  return mix(sc, batched_labels(src_labels, n), ec, batched_labels(ex_labels, n), batched_labels(mask, n), mode);
}

torch::Tensor Editor::transfer(const torch::Tensor& source, const torch::Tensor& exemplar,
                               const torch::Tensor& src_labels, const torch::Tensor& ex_labels,
                               const torch::Tensor& mask, MixMode mode, std::vector<std::string>* warnings) {
  auto z = transfer_latent(source, exemplar, src_labels, ex_labels, mask, mode);
  if (warnings) {
    const int64_t n = batched(source).size(0);
    auto m = batched_labels(mask, n), ey = batched_labels(ex_labels, n);
    auto absent = torch::logical_and(m == 1, ey == 0).any(0);
    for (int i = 0; i < model_.config.n_attrs; ++i)
      if (absent[i].item<bool>())
        warnings->push_back("attribute " + std::to_string(i) +
                            " is selected but absent in the exemplar; its block is zeroed (removal)");
  }
  torch::NoGradGuard ng;
  return like_input(model_.generator->decode(z), source);
}

torch::Tensor Editor::multi_transfer(const torch::Tensor& source, const torch::Tensor& exemplar,
                                     const torch::Tensor& src_labels, const torch::Tensor& ex_labels,
                                     const torch::Tensor& mask, MixMode mode, std::vector<std::string>* warnings) {
  auto m = mask.dim() == 1 ? mask.unsqueeze(0) : mask;
  if ((m.sum(1) < 2).any().item<bool>()) throw ValidationError("multi_transfer needs at least two selected attributes");
  return transfer(source, exemplar, src_labels, ex_labels, mask, mode, warnings);
}

torch::Tensor Editor::predict_labels(const torch::Tensor& image) {
  torch::NoGradGuard ng;
  auto p = model_.critic->classify(batched(image).to(model_.generator->parameters().front().scalar_type()));
  return like_input((p > 0.5).to(torch::kFloat32), image);
}

}  // namespace mulgan
