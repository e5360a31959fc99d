#include "networks.hpp"

#include <algorithm>

#include "errors.hpp"
#include "seeding.hpp"

namespace nn = torch::nn;

namespace mulgan {

void validate(const ModelConfig& cfg) {
  if (cfg.n_attrs < 1) throw ConfigError("model.n_attrs must be at least 1");
  if (cfg.down_layers < 1 || cfg.down_layers > 8) throw ConfigError("model.down_layers must be in [1,8]");
  if (cfg.base_channels < 1) throw ConfigError("model.base_channels must be positive");
  if (cfg.max_channels < cfg.base_channels) throw ConfigError("model.max_channels must be >= model.base_channels");
  if (cfg.critic_layers < 1) throw ConfigError("model.critic_layers must be positive");
  if (cfg.critic_base_channels < 0) throw ConfigError("model.critic_base_channels must be >= 0");
  const int factor = 1 << cfg.down_layers;
  if (cfg.image_size < factor || cfg.image_size % factor != 0)
    throw ConfigError("model.image_size=" + std::to_string(cfg.image_size) + " is not divisible by 2^model.down_layers=" +
                      std::to_string(factor));
}

std::vector<int64_t> encoder_widths(const ModelConfig& cfg) {
  std::vector<int64_t> w;
  for (int i = 1; i <= cfg.down_layers; ++i)
    w.push_back(std::min<int64_t>(static_cast<int64_t>(cfg.base_channels) << i, cfg.max_channels));
  const int64_t q = 2 * cfg.n_attrs;
  w.back() = (w.back() + q - 1) / q * q;
  return w;
}

int64_t latent_channels(const ModelConfig& cfg) { return encoder_widths(cfg).back(); }

int64_t latent_spatial(const ModelConfig& cfg) { return cfg.image_size >> cfg.down_layers; }

CriticLayout critic_layout(const ModelConfig& cfg) {
  CriticLayout l;
  const int64_t base = cfg.critic_base_channels > 0 ? cfg.critic_base_channels : cfg.base_channels;
  int64_t s = cfg.image_size;
  for (int i = 1; i <= cfg.critic_layers; ++i) {
    l.widths.push_back(std::min<int64_t>(base << std::min(i, 20), cfg.max_channels));
    if (s > 1 && s % 2 == 0) {
      l.strides.push_back(2);
      s /= 2;
    } else {
      l.strides.push_back(1);
    }
  }
  l.final_spatial = s;
  return l;
}

EncoderImpl::EncoderImpl(const ModelConfig& cfg) {
  validate(cfg);
  net_ = nn::Sequential();
  int64_t in = 3;
  const auto widths = encoder_widths(cfg);
  for (size_t i = 0; i < widths.size(); ++i) {
    net_->push_back(nn::Conv2d(nn::Conv2dOptions(in, widths[i], 4).stride(2).padding(1)));
    if (i + 1 < widths.size()) {
      if (i > 0) net_->push_back(nn::GroupNorm(nn::GroupNormOptions(1, widths[i])));
      net_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    }
    in = widths[i];
  }
  register_module("net", net_);
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& images) { return net_->forward(images); }

DecoderImpl::DecoderImpl(const ModelConfig& cfg) {
  validate(cfg);
  net_ = nn::Sequential();
  auto widths = encoder_widths(cfg);
  std::reverse(widths.begin(), widths.end());
  widths.push_back(cfg.base_channels);
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    net_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(widths[i], widths[i + 1], 4).stride(2).padding(1)));
    net_->push_back(nn::GroupNorm(nn::GroupNormOptions(1, widths[i + 1])));
    net_->push_back(nn::ReLU());
  }
  // full-resolution output layer
  net_->push_back(nn::Conv2d(nn::Conv2dOptions(cfg.base_channels, 3, 3).padding(1)));
  net_->push_back(nn::Tanh());
  register_module("net", net_);
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& latent) { return net_->forward(latent); }

GeneratorImpl::GeneratorImpl(const ModelConfig& cfg) : cfg_(cfg) {
  validate(cfg);
  encoder_ = register_module("encoder", Encoder(cfg));
  decoder_ = register_module("decoder", Decoder(cfg));
}

torch::Tensor GeneratorImpl::encode(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != cfg_.image_size ||
      images.size(3) != cfg_.image_size)
    throw ShapeError("encode expects (N,3," + std::to_string(cfg_.image_size) + "," +
                     std::to_string(cfg_.image_size) + ") images");
  return encoder_->forward(images);
}

torch::Tensor GeneratorImpl::decode(const torch::Tensor& latent) {
  const int64_t s = latent_spatial(cfg_);
  if (latent.dim() != 4 || latent.size(1) != latent_channels(cfg_) || latent.size(2) != s || latent.size(3) != s)
    throw ShapeError("decode expects (N," + std::to_string(latent_channels(cfg_)) + "," + std::to_string(s) + "," +
                     std::to_string(s) + ") latents");
  return decoder_->forward(latent);
}

CriticImpl::CriticImpl(const ModelConfig& cfg) : cfg_(cfg) {
  validate(cfg);
  const auto layout = critic_layout(cfg);
  backbone_ = nn::Sequential();
  int64_t in = 3;
  for (size_t i = 0; i < layout.widths.size(); ++i) {
    if (layout.strides[i] == 2)
      backbone_->push_back(nn::Conv2d(nn::Conv2dOptions(in, layout.widths[i], 4).stride(2).padding(1)));
    else
      backbone_->push_back(nn::Conv2d(nn::Conv2dOptions(in, layout.widths[i], 3).stride(1).padding(1)));
    backbone_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    in = layout.widths[i];
  }
  backbone_->push_back(nn::Flatten());
  register_module("backbone", backbone_);
  const int64_t feat = in * layout.final_spatial * layout.final_spatial;
  score_head_ = register_module("score_head", nn::Linear(feat, 1));
  attr_head_ = register_module("attr_head", nn::Linear(feat, cfg.n_attrs));
}

torch::Tensor CriticImpl::features(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != cfg_.image_size ||
      images.size(3) != cfg_.image_size)
    throw ShapeError("critic expects (N,3," + std::to_string(cfg_.image_size) + "," +
                     std::to_string(cfg_.image_size) + ") images");
  return backbone_->forward(images);
}

CriticOutput CriticImpl::heads(const torch::Tensor& feats) {
  return {score_head_->forward(feats).squeeze(1),
          torch::sigmoid(attr_head_->forward(feats)).clamp(kProbEps, 1.0 - kProbEps)};
}

torch::Tensor CriticImpl::score(const torch::Tensor& images) { return score_head_->forward(features(images)).squeeze(1); }

torch::Tensor CriticImpl::classify(const torch::Tensor& images) { return heads(features(images)).probs; }

CriticOutput CriticImpl::forward(const torch::Tensor& images) { return heads(features(images)); }

MulGanModel MulGanModel::build(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  MulGanModel m;
  m.config = cfg;
  torch::manual_seed(derive_seed(seed, "init-generator"));
  m.generator = Generator(cfg);
  torch::manual_seed(derive_seed(seed, "init-critic"));
  m.critic = Critic(cfg);
  return m;
}

std::vector<std::pair<std::string, torch::Tensor>> MulGanModel::named_parameters() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : generator->named_parameters()) out.emplace_back("generator." + p.key(), p.value());
  for (const auto& p : critic->named_parameters()) out.emplace_back("critic." + p.key(), p.value());
  return out;
}

void MulGanModel::to(torch::Dtype dtype) {
  generator->to(dtype);
  critic->to(dtype);
}

void MulGanModel::set_train(bool on) {
  generator->train(on);
  critic->train(on);
}

std::uint64_t parameter_hash(const std::vector<torch::Tensor>& params) {
  std::uint64_t h = fnv1a("params");
  for (const auto& p : params) {
    auto c = p.detach().contiguous();
    const auto* bytes = static_cast<const unsigned char*>(c.data_ptr());
    const size_t n = static_cast<size_t>(c.numel()) * c.element_size();
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace mulgan
