#pragma once

#include <Eigen/Dense>
#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "editing.hpp"
#include "oracle.hpp"

namespace mulgan {

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased, symmetric
  int64_t count = 0;
};

/// Streaming mean/covariance (Welford with Chan's pairwise merge).
class StatsAccumulator {
 public:
  explicit StatsAccumulator(int64_t dim);

  void add(const Eigen::Ref<const Eigen::MatrixXd>& rows);  // one sample per row
  void add(const torch::Tensor& rows);                      // (N, dim)
  void merge(const StatsAccumulator& other);

  int64_t count() const { return n_; }
  /// Adds 1e-6*I when fewer than 10*dim samples were seen. Needs >= 2 samples.
  FeatureStats finalize() const;

 private:
  int64_t n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
};

/// ||mu1-mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2}). The square root term is
/// tr((S1^{1/2} S2 S1^{1/2})^{1/2}) via symmetric eigendecompositions;
/// eigenvalues in [-1e-6, 0) are clipped, more negative ones throw.
double frechet_distance(const FeatureStats& s1, const FeatureStats& s2);

/// Runs the extractor over images in chunks and accumulates statistics.
FeatureStats extract_features(const torch::Tensor& images, FeatureExtractor& extractor, int64_t chunk = 256);

/// rate_i = fraction of images whose oracle prediction (> 0.5) for
/// attribute i equals expected(:, i).
std::vector<double> attribute_match_rate(Oracle& oracle, const torch::Tensor& images, const torch::Tensor& expected);

struct EvalOptions {
  int64_t n_images = 1000;
  std::uint64_t seed = 0;
  int64_t chunk = 128;
};

/// Metrics for a trained model on held-out images, laid out per attribute.
struct EvalReport {
  std::vector<std::string> attributes;
  int64_t n_images = 0;
  double reconstruction_mae = 0;
  double fid_reconstruction = 0;
  double fid_noise = 0;
  std::vector<double> fid_transfer;         // per transferred attribute
  std::vector<double> match_single;         // attribute i after transferring i alone
  std::vector<double> preserve_single;      // untouched attributes after transferring i
  struct Pair {
    int i = 0, j = 0;
    double rate_i = 0, rate_j = 0;
  };
  std::vector<Pair> match_double;           // both attributes transferred in one pass
  nlohmann::json config;

  nlohmann::json to_json() const;
};

/// Held-out evaluation: reconstructions, single-attribute transfers from
/// exemplars with the opposite value, and two-attribute transfers from
/// exemplars opposite on both, all in mix mode.
EvalReport evaluate(Editor& editor, const ImageSource& source, Oracle& oracle, const EvalOptions& opts);

}  // namespace mulgan
