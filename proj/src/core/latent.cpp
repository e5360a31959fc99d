#include "latent.hpp"

#include "errors.hpp"

namespace mulgan {
namespace {

int64_t channel_dim(const torch::Tensor& t) {
  if (t.dim() != 3 && t.dim() != 4) throw ShapeError("latent tensors must be (c,h,w) or (N,c,h,w)");
  return t.dim() - 3;
}

bool is_binary(const torch::Tensor& t) { return torch::logical_or(t == 0, t == 1).all().item<bool>(); }

// Label column i shaped to broadcast against a block.
torch::Tensor column(const torch::Tensor& labels, int i, const torch::Tensor& block) {
  if (labels.dim() == 1) return labels[i].to(block.dtype());
  return labels.select(1, i).to(block.dtype()).view({-1, 1, 1, 1});
}

void check_same_layout(const LatentCode& a, const LatentCode& b) {
  if (a.n_attrs() != b.n_attrs()) throw ShapeError("latent codes have different attribute counts");
  if (!a.irrelevant.sizes().equals(b.irrelevant.sizes())) throw ShapeError("latent codes have different shapes");
  for (int i = 0; i < a.n_attrs(); ++i)
    if (!a.blocks[static_cast<size_t>(i)].sizes().equals(b.blocks[static_cast<size_t>(i)].sizes()))
      throw ShapeError("latent blocks have different shapes");
}

}  // namespace

torch::Tensor LatentCode::concat() const {
  std::vector<torch::Tensor> parts(blocks.begin(), blocks.end());
  parts.push_back(irrelevant);
  return torch::cat(parts, channel_dim(irrelevant));
}

void check_split_channels(int64_t channels, int n_attrs) {
  if (n_attrs < 1) throw ConfigError("n_attrs must be at least 1");
  if (channels % 2 != 0 || (channels / 2) % n_attrs != 0)
    throw ConfigError("latent channel count " + std::to_string(channels) + " cannot be split for n_attrs=" +
                      std::to_string(n_attrs) + ": it must be a multiple of " + std::to_string(2 * n_attrs));
}

LatentCode split(const torch::Tensor& raw, int n_attrs) {
  const int64_t cd = channel_dim(raw);
  check_split_channels(raw.size(cd), n_attrs);
  const int64_t half = raw.size(cd) / 2;
  const int64_t cb = half / n_attrs;
  LatentCode code;
  for (int i = 0; i < n_attrs; ++i) code.blocks.push_back(raw.narrow(cd, i * cb, cb));
  code.irrelevant = raw.narrow(cd, half, half);
  return code;
}

torch::Tensor label_tensor_for(const LatentCode& code, const torch::Tensor& labels, const char* what) {
  const bool batched = code.irrelevant.dim() == 4;
  torch::Tensor l = labels;
  if (batched && l.dim() == 1) l = l.unsqueeze(0).expand({code.irrelevant.size(0), l.size(0)});
  if (!batched && l.dim() == 2 && l.size(0) == 1) l = l[0];
  const bool ok = batched ? (l.dim() == 2 && l.size(0) == code.irrelevant.size(0)) : l.dim() == 1;
  if (!ok || l.size(-1) != code.n_attrs())
    throw ShapeError(std::string(what) + ": label shape does not match " + std::to_string(code.n_attrs()) +
                     " attribute blocks");
  if (!is_binary(l)) throw ValidationError(std::string(what) + ": labels must be 0 or 1");
  return l;
}

FilteredLatent filter(const LatentCode& code, const torch::Tensor& labels) {
  auto l = label_tensor_for(code, labels, "filter");
  FilteredLatent out;
  out.labels = l;
  out.code.irrelevant = code.irrelevant;
  for (int i = 0; i < code.n_attrs(); ++i) {
    const auto& b = code.blocks[static_cast<size_t>(i)];
    out.code.blocks.push_back(b * column(l, i, b));
  }
  return out;
}

FilteredLatent filter(const LatentCode& code, const AttributeVector& labels) {
  if (static_cast<int>(labels.size()) != code.n_attrs())
    throw ShapeError("filter: expected " + std::to_string(code.n_attrs()) + " labels");
  check_binary(labels, "filter labels");
  return filter(code, to_label_tensor(labels)[0]);
}

std::pair<FilteredLatent, FilteredLatent> swap(const FilteredLatent& src, const FilteredLatent& exemplar) {
  check_same_layout(src.code, exemplar.code);
  FilteredLatent zc{{exemplar.code.blocks, src.code.irrelevant}, exemplar.labels};
  FilteredLatent zd{{src.code.blocks, exemplar.code.irrelevant}, src.labels};
  return {std::move(zc), std::move(zd)};
}

FilteredLatent mix(const LatentCode& src, const torch::Tensor& src_labels, const LatentCode& exemplar,
                   const torch::Tensor& ex_labels, const torch::Tensor& mask, MixMode mode) {
  check_same_layout(src, exemplar);
  auto m = label_tensor_for(src, mask, "mix mask");
  auto ey = label_tensor_for(src, ex_labels, "mix exemplar labels");
  auto sy = mode == MixMode::Mix ? label_tensor_for(src, src_labels, "mix source labels") : torch::zeros_like(ey);

  FilteredLatent out;
  out.code.irrelevant = src.irrelevant;
  for (int i = 0; i < src.n_attrs(); ++i) {
    const auto& a = src.blocks[static_cast<size_t>(i)];
    const auto& b = exemplar.blocks[static_cast<size_t>(i)];
    auto take = column(m, i, b) == 1;
    auto from_ex = b * column(ey, i, b);
    auto keep = mode == MixMode::Mix ? a * column(sy, i, a) : torch::zeros_like(a);
    out.code.blocks.push_back(torch::where(take, from_ex, keep));
  }
  out.labels = torch::where(m == 1, ey, sy);
  return out;
}

MixMode parse_mix_mode(const std::string& s) {
  if (s == "mix") return MixMode::Mix;
  if (s == "replace") return MixMode::Replace;
  throw ConfigError("unknown mode '" + s + "' (expected mix or replace)");
}

const char* to_string(MixMode m) { return m == MixMode::Mix ? "mix" : "replace"; }

}  // namespace mulgan
