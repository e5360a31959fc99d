#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include <Eigen/Dense>

#include <random>

#include "errors.hpp"
#include "evaluation.hpp"
#include "oracle.hpp"
#include "runner.hpp"
#include "sprites.hpp"
#include "support.hpp"

using namespace mulgan;

namespace {

Eigen::MatrixXd random_spd(int dim, std::mt19937& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = g(rng);
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(dim, dim);
}

Eigen::VectorXd random_vec(int dim, std::mt19937& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = g(rng);
  return v;
}

// Definition-level distance: the principal square root of S1*S2 by the
// Denman-Beavers iteration, no symmetric eigensolver involved.
double reference_distance(const FeatureStats& a, const FeatureStats& b) {
  Eigen::MatrixXd y = a.cov * b.cov;
  Eigen::MatrixXd z = Eigen::MatrixXd::Identity(y.rows(), y.cols());
  for (int k = 0; k < 100; ++k) {
    Eigen::MatrixXd y_next = 0.5 * (y + z.inverse());
    Eigen::MatrixXd z_next = 0.5 * (z + y.inverse());
    y = y_next;
    z = z_next;
  }
  return (a.mean - b.mean).squaredNorm() + (a.cov + b.cov - 2 * y).trace();
}

FeatureStats random_stats(int dim, std::mt19937& rng) {
  return {random_vec(dim, rng), random_spd(dim, rng), 100};
}

class Slicer final : public FeatureExtractor {
 public:
  int64_t feature_dim() const override { return 5; }
  torch::Tensor extract(const torch::Tensor& images) override { return images.flatten(1).slice(1, 0, 5); }
};

}  // namespace

TEST_CASE("frechet distance closed forms") {
  std::mt19937 rng(1);
  auto s = random_stats(4, rng);
  CHECK(std::abs(frechet_distance(s, s)) < 1e-6);

  FeatureStats unit1{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3), 10};
  FeatureStats unit2{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3), 10};
  unit2.mean << 1, 2, 2;
  CHECK(frechet_distance(unit1, unit2) == doctest::Approx(9.0).epsilon(1e-12));

  // diagonal covariances: sum of (sqrt(a) - sqrt(b))^2
  FeatureStats d1{Eigen::VectorXd::Zero(2), Eigen::Vector2d(4, 9).asDiagonal(), 10};
  FeatureStats d2{Eigen::VectorXd::Zero(2), Eigen::Vector2d(1, 1).asDiagonal(), 10};
  CHECK(frechet_distance(d1, d2) == doctest::Approx(1.0 + 4.0).epsilon(1e-12));
}

TEST_CASE("frechet distance agrees with a definition-level implementation") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_stats(4, rng), b = random_stats(4, rng);
    const double ours = frechet_distance(a, b), ref = reference_distance(a, b);
    CAPTURE(trial);
    CHECK(std::abs(ours - ref) < 1e-6 * std::max(1.0, std::abs(ref)));
    CHECK(std::abs(ours - frechet_distance(b, a)) < 1e-6 * std::max(1.0, std::abs(ours)));
  }
}

TEST_CASE("frechet distance is invariant under a shared rotation") {
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  const int dim = 6, n = 200;
  Eigen::MatrixXd x(n, dim), y(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) {
      x(i, j) = g(rng);
      y(i, j) = 0.5 * g(rng) + 0.3 * j;
    }
  auto stats = [&](const Eigen::MatrixXd& rows) {
    StatsAccumulator acc(dim);
    acc.add(rows);
    return acc.finalize();
  };
  const double before = frechet_distance(stats(x), stats(y));
  for (int r = 0; r < 5; ++r) {
    Eigen::MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) m(i, j) = g(rng);
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
    CHECK(std::abs(frechet_distance(stats(x * q), stats(y * q)) - before) < 1e-5);
  }
}

TEST_CASE("indefinite products are rejected") {
  FeatureStats a{Eigen::VectorXd::Zero(2), Eigen::Matrix2d{{1, 0}, {0, -1}}, 10};
  FeatureStats b{Eigen::VectorXd::Zero(2), Eigen::Matrix2d::Identity(), 10};
  CHECK_THROWS_AS(frechet_distance(a, b), NumericalError);
  FeatureStats c{Eigen::VectorXd::Zero(3), Eigen::Matrix3d::Identity(), 10};
  CHECK_THROWS_AS(frechet_distance(b, c), ShapeError);
}

TEST_CASE("streaming statistics equal two-pass statistics") {
  std::mt19937 rng(11);
  std::normal_distribution<double> g(3.0, 2.0);
  const int dim = 4, n = 97;
  Eigen::MatrixXd rows(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) rows(i, j) = g(rng) * (j + 1);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < n; ++i) mean += rows.row(i).transpose() / n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd d = rows.row(i).transpose() - mean;
    cov += d * d.transpose() / (n - 1);
  }

  StatsAccumulator chunked(dim);
  for (int s = 0; s < n; s += 13) chunked.add(rows.middleRows(s, std::min(13, n - s)));
  StatsAccumulator left(dim), right(dim);
  left.add(rows.topRows(40));
  right.add(rows.bottomRows(n - 40));
  left.merge(right);
  for (const auto* acc : {&chunked, &left}) {
    auto st = acc->finalize();
    CHECK(st.count == n);
    CHECK((st.mean - mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((st.cov - cov).cwiseAbs().maxCoeff() < 1e-8);
  }

  StatsAccumulator one(dim);
  one.add(rows.topRows(1));
  CHECK_THROWS_AS(one.finalize(), ValidationError);
}

TEST_CASE("constant features have zero covariance; small samples are shrunk") {
  Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(40, 3, 0.25);
  StatsAccumulator acc(3);
  acc.add(constant);
  CHECK(acc.finalize().cov.cwiseAbs().maxCoeff() == 0.0);

  StatsAccumulator few(3);
  few.add(constant.topRows(5));
  CHECK((few.finalize().cov - 1e-6 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-18);
}

TEST_CASE("feature extraction follows the extractor's contract") {
  Slicer slicer;
  auto images = torch::rand({9, 3, 4, 4});
  auto stats = extract_features(images, slicer, 4);
  CHECK(stats.mean.size() == 5);
  CHECK(stats.count == 9);
  StatsAccumulator acc(5);
  acc.add(images.flatten(1).slice(1, 0, 5).to(torch::kFloat64));
  CHECK((stats.mean - acc.finalize().mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("oracle: held-out accuracy, self-consistency and persistence") {
  SpriteSource sprites(SpriteSpec{}, 31, 4000, 0, 500);
  OracleOptions opts;
  opts.seed = 2;
  auto oracle = train_oracle(sprites, opts);
  auto acc = oracle_accuracy(oracle, sprites, sprites.split().test);
  for (double a : acc) CHECK(a >= 0.99);

  auto batch = sprites.load(sprites.split().test);
  auto own = (oracle.predict(batch.images) > 0.5).to(torch::kFloat32);
  for (double r : attribute_match_rate(oracle, batch.images, own)) CHECK(r == 1.0);
  auto rates = attribute_match_rate(oracle, batch.images, batch.labels);
  for (size_t i = 0; i < rates.size(); ++i) CHECK(rates[i] == doctest::Approx(acc[i]));
  CHECK(oracle.extract(batch.images.slice(0, 0, 3)).sizes() == torch::IntArrayRef({3, oracle.feature_dim()}));
  CHECK_THROWS_AS(attribute_match_rate(oracle, batch.images.slice(0, 0, 0), batch.labels.slice(0, 0, 0)),
                  ValidationError);

  testing::TempDir dir("oracle");
  oracle.save(dir / "o.mgck");
  auto back = Oracle::load(dir / "o.mgck");
  CHECK(testing::bit_equal(back.predict(batch.images), oracle.predict(batch.images)));
  CHECK(back.attribute_names() == oracle.attribute_names());
}

TEST_CASE("evaluation report is reproducible and well formed") {
  auto cfg = testing::tiny_run(0);
  auto source = make_source(cfg);
  Oracle oracle(cfg.model.image_size, source->attribute_names(), 8);
  Editor editor(MulGanModel::build(cfg.model, 1));
  EvalOptions opts;
  opts.n_images = 8;
  auto r1 = evaluate(editor, *source, oracle, opts);
  auto r2 = evaluate(editor, *source, oracle, opts);
  CHECK(r1.to_json() == r2.to_json());
  CHECK(r1.n_images == 8);
  CHECK(r1.match_single.size() == 3);
  CHECK(r1.match_double.size() == 3);
  for (double r : r1.match_single)
    if (!std::isnan(r)) CHECK((r >= 0 && r <= 1));
  CHECK(r1.fid_noise > 0);
  CHECK(r1.to_json()["note"].get<std::string>().find("style correlation") != std::string::npos);

  Oracle wrong(cfg.model.image_size, {"glasses"}, 8);
  CHECK_THROWS_AS(evaluate(editor, *source, wrong, opts), ConfigError);
}
