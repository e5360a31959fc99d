#include "oracle.hpp"

#include "checkpoint.hpp"
#include "errors.hpp"
#include "seeding.hpp"

namespace nn = torch::nn;

namespace mulgan {

OracleNetImpl::OracleNetImpl(int image_size, int n_attrs, int feature_dim) {
  if (image_size % 8 != 0) throw ConfigError("oracle image size must be divisible by 8");
  const int64_t s = image_size / 8;
  trunk_ = nn::Sequential(nn::Conv2d(nn::Conv2dOptions(3, 16, 3).padding(1)), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                          nn::Conv2d(nn::Conv2dOptions(16, 32, 4).stride(2).padding(1)), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                          nn::Conv2d(nn::Conv2dOptions(32, 64, 4).stride(2).padding(1)), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                          nn::Conv2d(nn::Conv2dOptions(64, 64, 4).stride(2).padding(1)), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                          nn::Flatten(), nn::Linear(64 * s * s, feature_dim), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  register_module("trunk", trunk_);
  head_ = register_module("head", nn::Linear(feature_dim, n_attrs));
}

torch::Tensor OracleNetImpl::features(const torch::Tensor& images) { return trunk_->forward(images); }

torch::Tensor OracleNetImpl::logits_from(const torch::Tensor& f) { return head_->forward(f); }

Oracle::Oracle(int image_size, std::vector<std::string> attribute_names, int feature_dim)
    : image_size_(image_size), names_(std::move(attribute_names)), feature_dim_(feature_dim) {
  if (names_.empty()) throw ConfigError("oracle needs at least one attribute");
  net_ = OracleNet(image_size_, static_cast<int>(names_.size()), feature_dim_);
}

torch::Tensor Oracle::extract(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(2) != image_size_ || images.size(3) != image_size_)
    throw ShapeError("oracle expects (N,3," + std::to_string(image_size_) + "," + std::to_string(image_size_) + ") images");
  torch::NoGradGuard ng;
  net_->eval();
  return net_->features(images);
}

torch::Tensor Oracle::predict(const torch::Tensor& images) {
  auto f = extract(images);
  torch::NoGradGuard ng;
  return torch::sigmoid(net_->logits_from(f));
}

void Oracle::save(const std::filesystem::path& path) const {
  TensorArchive ar;
  ar.kind = "mulgan-oracle";
  ar.meta = {{"image_size", image_size_}, {"attributes", names_}, {"feature_dim", feature_dim_}};
  for (const auto& p : net_->named_parameters()) ar.tensors.emplace_back(p.key(), p.value());
  write_archive(path, ar);
}

Oracle Oracle::load(const std::filesystem::path& path) {
  auto ar = read_archive(path);
  if (ar.kind != "mulgan-oracle") throw ParseError(path.string() + " holds a '" + ar.kind + "', not an oracle");
  Oracle o(ar.meta.at("image_size").get<int>(), ar.meta.at("attributes").get<std::vector<std::string>>(),
           ar.meta.at("feature_dim").get<int>());
  torch::NoGradGuard ng;
  for (auto& p : o.net_->named_parameters()) {
    const auto* t = ar.find(p.key());
    if (!t || !t->sizes().equals(p.value().sizes())) throw ShapeError("oracle archive does not match parameter " + p.key());
    p.value().copy_(*t);
  }
  return o;
}

Oracle train_oracle(const ImageSource& source, const OracleOptions& opts) {
  torch::manual_seed(derive_seed(opts.seed, "oracle-init"));
  Oracle oracle(source.image_size(), source.attribute_names(), opts.feature_dim);
  auto& net = oracle.net();
  net->train();
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(opts.lr));
  BatchSampler sampler(source.split().train, derive_seed(opts.seed, "oracle-data"));
  const auto bs = std::min<size_t>(static_cast<size_t>(opts.batch_size), source.split().train.size());
  for (int step = 0; step < opts.steps; ++step) {
    auto batch = source.load(sampler.next(bs));
    auto logits = net->logits_from(net->features(batch.images));
    auto loss = torch::binary_cross_entropy_with_logits(logits, batch.labels);
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  net->eval();
  return oracle;
}

std::vector<double> oracle_accuracy(Oracle& oracle, const ImageSource& source, const std::vector<size_t>& indices) {
  if (indices.empty()) throw ValidationError("oracle_accuracy needs at least one image");
  std::vector<double> hits(static_cast<size_t>(oracle.n_attrs()), 0.0);
  for (size_t start = 0; start < indices.size(); start += 256) {
    const size_t end = std::min(indices.size(), start + 256);
    auto batch = source.load(std::span<const size_t>(indices.data() + start, end - start));
    auto pred = (oracle.predict(batch.images) > 0.5).to(torch::kFloat32);
    auto eq = (pred == batch.labels).to(torch::kFloat64).sum(0);
    for (int i = 0; i < oracle.n_attrs(); ++i) hits[static_cast<size_t>(i)] += eq[i].item<double>();
  }
  for (auto& h : hits) h /= static_cast<double>(indices.size());
  return hits;
}

}  // namespace mulgan
