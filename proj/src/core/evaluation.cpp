#include "evaluation.hpp"

#include <ATen/CPUGeneratorImpl.h>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "seeding.hpp"

namespace mulgan {
namespace {

constexpr double kClipTol = 1e-6;

Eigen::MatrixXd to_eigen(const torch::Tensor& rows) {
  auto t = rows.detach().to(torch::kFloat64).contiguous();
  if (t.dim() != 2) throw ShapeError("feature rows must be (N, dim)");
  Eigen::MatrixXd m(t.size(0), t.size(1));
  auto acc = t.accessor<double, 2>();
  for (int64_t r = 0; r < t.size(0); ++r)
    for (int64_t c = 0; c < t.size(1); ++c) m(r, c) = acc[r][c];
  return m;
}

Eigen::VectorXd clipped_eigenvalues(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError(std::string("eigendecomposition failed for ") + what);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -kClipTol) {
      std::ostringstream ss;
      ss << what << " is not positive semi-definite: eigenvalue " << ev(i) << " (range " << ev.minCoeff() << " .. "
         << ev.maxCoeff() << ")";
      throw NumericalError(ss.str());
    }
    if (ev(i) < 0) ev(i) = 0;
  }
  return ev;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericalError(std::string("eigendecomposition failed for ") + what);
  Eigen::VectorXd ev = clipped_eigenvalues(m, what);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

StatsAccumulator::StatsAccumulator(int64_t dim)
    : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::MatrixXd::Zero(dim, dim)) {}

void StatsAccumulator::add(const Eigen::Ref<const Eigen::MatrixXd>& rows) {
  if (rows.cols() != mean_.size()) throw ShapeError("feature dimension mismatch in statistics accumulation");
  if (rows.rows() == 0) return;
  // Batch statistics, then merged into the running state.
  StatsAccumulator batch(mean_.size());
  batch.n_ = rows.rows();
  batch.mean_ = rows.colwise().mean().transpose();
  Eigen::MatrixXd centered = rows.rowwise() - batch.mean_.transpose();
  batch.m2_ = centered.transpose() * centered;
  merge(batch);
}

void StatsAccumulator::add(const torch::Tensor& rows) { add(to_eigen(rows)); }

void StatsAccumulator::merge(const StatsAccumulator& other) {
  if (other.mean_.size() != mean_.size()) throw ShapeError("cannot merge statistics of different dimension");
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(other.n_);
  const double n = na + nb;
  Eigen::VectorXd delta = other.mean_ - mean_;
  mean_ += delta * (nb / n);
  m2_ += other.m2_ + delta * delta.transpose() * (na * nb / n);
  n_ += other.n_;
}

FeatureStats StatsAccumulator::finalize() const {
  if (n_ < 2) throw ValidationError("feature statistics need at least 2 images, got " + std::to_string(n_));
  FeatureStats s;
  s.count = n_;
  s.mean = mean_;
  s.cov = symmetrized(m2_ / static_cast<double>(n_ - 1));
  if (n_ < 10 * mean_.size()) s.cov += 1e-6 * Eigen::MatrixXd::Identity(mean_.size(), mean_.size());
  return s;
}

double frechet_distance(const FeatureStats& s1, const FeatureStats& s2) {
  const auto f = s1.mean.size();
  if (s2.mean.size() != f || s1.cov.rows() != f || s1.cov.cols() != f || s2.cov.rows() != f || s2.cov.cols() != f)
    throw ShapeError("frechet_distance: feature dimensions differ");
  const Eigen::MatrixXd c1 = symmetrized(s1.cov), c2 = symmetrized(s2.cov);
  const Eigen::MatrixXd r1 = psd_sqrt(c1, "covariance 1");
  clipped_eigenvalues(c2, "covariance 2");
  const Eigen::VectorXd ev = clipped_eigenvalues(symmetrized(r1 * c2 * r1), "covariance product");
  const double tr_sqrt = ev.cwiseSqrt().sum();
  const double fid = (s1.mean - s2.mean).squaredNorm() + c1.trace() + c2.trace() - 2.0 * tr_sqrt;
  if (fid < -kClipTol) throw NumericalError("frechet_distance is negative (" + std::to_string(fid) + ")");
  return std::max(fid, 0.0);
}

FeatureStats extract_features(const torch::Tensor& images, FeatureExtractor& extractor, int64_t chunk) {
  if (images.dim() != 4 || images.size(0) < 2) throw ValidationError("extract_features needs at least 2 images");
  StatsAccumulator acc(extractor.feature_dim());
  for (int64_t s = 0; s < images.size(0); s += chunk) {
    auto feats = extractor.extract(images.slice(0, s, std::min(images.size(0), s + chunk)));
    if (feats.dim() != 2 || feats.size(1) != extractor.feature_dim())
      throw ShapeError("extractor returned features of unexpected shape");
    acc.add(feats);
  }
  return acc.finalize();
}

std::vector<double> attribute_match_rate(Oracle& oracle, const torch::Tensor& images, const torch::Tensor& expected) {
  if (!images.defined() || images.dim() != 4 || images.size(0) == 0)
    throw ValidationError("attribute_match_rate needs at least one image");
  if (expected.dim() != 2 || expected.size(0) != images.size(0) || expected.size(1) != oracle.n_attrs())
    throw ShapeError("expected labels must be (N, n_attrs)");
  std::vector<double> hits(static_cast<size_t>(oracle.n_attrs()), 0.0);
  for (int64_t s = 0; s < images.size(0); s += 256) {
    const int64_t e = std::min(images.size(0), s + 256);
    auto pred = (oracle.predict(images.slice(0, s, e)) > 0.5).to(torch::kFloat32);
    auto eq = (pred == expected.slice(0, s, e).to(torch::kFloat32)).to(torch::kFloat64).sum(0);
    for (int i = 0; i < oracle.n_attrs(); ++i) hits[static_cast<size_t>(i)] += eq[i].item<double>();
  }
  for (auto& h : hits) h /= static_cast<double>(images.size(0));
  return hits;
}

nlohmann::json EvalReport::to_json() const {
  using nlohmann::json;
  json j;
  j["note"] =
      "match rates measure attribute presence under an independently trained oracle classifier; "
      "they do not measure style correlation";
  j["n_images"] = n_images;
  j["attributes"] = attributes;
  j["reconstruction_mae"] = reconstruction_mae;
  j["fid"] = {{"reconstruction", fid_reconstruction}, {"noise", fid_noise}, {"transfer", json::object()}};
  j["match_rate"] = {{"single", json::object()}, {"preserve", json::object()}, {"double", json::object()}};
  for (size_t i = 0; i < attributes.size(); ++i) {
    if (i < fid_transfer.size()) j["fid"]["transfer"][attributes[i]] = fid_transfer[i];
    if (i < match_single.size()) j["match_rate"]["single"][attributes[i]] = match_single[i];
    if (i < preserve_single.size()) j["match_rate"]["preserve"][attributes[i]] = preserve_single[i];
  }
  for (const auto& p : match_double) {
    const auto& a = attributes[static_cast<size_t>(p.i)];
    const auto& b = attributes[static_cast<size_t>(p.j)];
    j["match_rate"]["double"][a + "+" + b] = {{a, p.rate_i}, {b, p.rate_j}};
  }
  j["config"] = config;
  return j;
}

namespace {

// For each source row, an exemplar row whose labels differ from the source
// on every attribute in `attrs` (others unconstrained); -1 if none exists.
std::vector<int64_t> pick_exemplars(const torch::Tensor& labels, const std::vector<int>& attrs, std::uint64_t seed) {
  const int64_t n = labels.size(0);
  auto perm = seeded_permutation(n, seed);
  auto acc = labels.accessor<float, 2>();
  std::vector<int64_t> out(static_cast<size_t>(n), -1);
  for (int64_t s = 0; s < n; ++s) {
    for (int64_t k = 0; k < n; ++k) {
      const int64_t e = perm[static_cast<size_t>((s + k) % n)];
      bool ok = e != s;
      for (int a : attrs) ok = ok && acc[e][a] != acc[s][a];
      if (ok) {
        out[static_cast<size_t>(s)] = e;
        break;
      }
    }
  }
  return out;
}

}  // namespace

EvalReport evaluate(Editor& editor, const ImageSource& source, Oracle& oracle, const EvalOptions& opts) {
  const int n_attrs = source.n_attrs();
  if (oracle.n_attrs() != n_attrs || oracle.image_size() != source.image_size())
    throw ConfigError("oracle does not match the dataset (attributes or image size)");
  if (editor.config().n_attrs != n_attrs) throw ConfigError("model and dataset have different attribute counts");

  std::vector<size_t> idx = source.split().test.empty() ? source.split().val : source.split().test;
  if (idx.empty()) idx = source.split().train;
  if (static_cast<int64_t>(idx.size()) > opts.n_images) idx.resize(static_cast<size_t>(opts.n_images));
  if (idx.size() < 2) throw ValidationError("evaluation needs at least 2 held-out images");
  auto real = source.load(idx);
  const int64_t n = real.size();

  auto run_chunked = [&](auto&& fn) {
    std::vector<torch::Tensor> parts;
    for (int64_t s = 0; s < n; s += opts.chunk) parts.push_back(fn(s, std::min(n, s + opts.chunk)));
    return torch::cat(parts);
  };

  EvalReport rep;
  rep.attributes = source.attribute_names();
  rep.n_images = n;
  auto real_stats = extract_features(real.images, oracle);

  auto recon = run_chunked([&](int64_t s, int64_t e) {
    return editor.reconstruct(real.images.slice(0, s, e), real.labels.slice(0, s, e));
  });
  rep.reconstruction_mae = (recon - real.images).abs().mean().item<double>();
  rep.fid_reconstruction = frechet_distance(extract_features(recon, oracle), real_stats);

  auto gen = at::detail::createCPUGenerator(derive_seed(opts.seed, "eval-noise"));
  auto noise = torch::rand(real.images.sizes(), gen) * 2 - 1;
  rep.fid_noise = frechet_distance(extract_features(noise, oracle), real_stats);

  // One transfer experiment: exemplars opposite on `attrs`, mask selecting `attrs`.
  auto experiment = [&](const std::vector<int>& attrs, std::uint64_t seed, torch::Tensor& out_images,
                        torch::Tensor& expected, std::vector<int64_t>& rows) {
    auto ex = pick_exemplars(real.labels, attrs, seed);
    rows.clear();
    std::vector<int64_t> ex_rows;
    for (int64_t s = 0; s < n; ++s)
      if (ex[static_cast<size_t>(s)] >= 0) {
        rows.push_back(s);
        ex_rows.push_back(ex[static_cast<size_t>(s)]);
      }
    if (rows.empty()) return false;
    auto src = real.index_select(rows);
    auto exb = real.index_select(ex_rows);
    auto mask = torch::zeros({1, n_attrs});
    for (int a : attrs) mask[0][a] = 1;
    mask = mask.expand({src.size(), n_attrs}).contiguous();
    std::vector<torch::Tensor> parts;
    for (int64_t s = 0; s < src.size(); s += opts.chunk) {
      const int64_t e = std::min(src.size(), s + opts.chunk);
      parts.push_back(editor.transfer(src.images.slice(0, s, e), exb.images.slice(0, s, e), src.labels.slice(0, s, e),
                                      exb.labels.slice(0, s, e), mask.slice(0, s, e), MixMode::Mix));
    }
    out_images = torch::cat(parts);
    expected = torch::where(mask == 1, exb.labels, src.labels);
    return true;
  };

  for (int i = 0; i < n_attrs; ++i) {
    torch::Tensor imgs, expected;
    std::vector<int64_t> rows;
    if (!experiment({i}, derive_seed(opts.seed, "eval-single", {static_cast<std::uint64_t>(i)}), imgs, expected, rows)) {
      rep.match_single.push_back(std::nan(""));
      rep.preserve_single.push_back(std::nan(""));
      rep.fid_transfer.push_back(std::nan(""));
      continue;
    }
    auto rates = attribute_match_rate(oracle, imgs, expected);
    rep.match_single.push_back(rates[static_cast<size_t>(i)]);
    double keep = 0;
    for (int j = 0; j < n_attrs; ++j)
      if (j != i) keep += rates[static_cast<size_t>(j)];
    rep.preserve_single.push_back(n_attrs > 1 ? keep / (n_attrs - 1) : 1.0);
    rep.fid_transfer.push_back(imgs.size(0) >= 2 ? frechet_distance(extract_features(imgs, oracle), real_stats)
                                                 : std::nan(""));
  }

  for (int i = 0; i < n_attrs; ++i)
    for (int j = i + 1; j < n_attrs; ++j) {
      torch::Tensor imgs, expected;
      std::vector<int64_t> rows;
      EvalReport::Pair p{i, j, std::nan(""), std::nan("")};
      if (experiment({i, j}, derive_seed(opts.seed, "eval-double", {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)}),
                     imgs, expected, rows)) {
        auto rates = attribute_match_rate(oracle, imgs, expected);
        p.rate_i = rates[static_cast<size_t>(i)];
        p.rate_j = rates[static_cast<size_t>(j)];
      }
      rep.match_double.push_back(p);
    }
  return rep;
}

}  // namespace mulgan
