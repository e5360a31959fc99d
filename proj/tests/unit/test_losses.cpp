#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include <cmath>

#include "errors.hpp"
#include "losses.hpp"
#include "support.hpp"
#include "training.hpp"

using namespace mulgan;

namespace {

double scalar(const torch::Tensor& t) { return t.item<double>(); }

auto opts64() { return torch::TensorOptions().dtype(torch::kFloat64); }

}  // namespace

TEST_CASE("reconstruction loss") {
  auto a = torch::rand({2, 3, 4, 4}, opts64());
  CHECK(scalar(reconstruction_loss(a, a)) == 0.0);
  CHECK(scalar(reconstruction_loss(torch::ones({1, 3, 2, 2}), -torch::ones({1, 3, 2, 2}))) == doctest::Approx(2.0));
  CHECK(scalar(reconstruction_loss(torch::ones({1, 3, 2, 2}), -torch::ones({1, 3, 2, 2}), RecNorm::L2)) ==
        doctest::Approx(4.0));

  auto b = torch::rand({2, 3, 4, 4}, opts64());
  auto pa = a.accessor<double, 4>(), pb = b.accessor<double, 4>();
  double l1 = 0, l2 = 0;
  int count = 0;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x, ++count) {
          const double d = pa[n][c][y][x] - pb[n][c][y][x];
          l1 += std::abs(d);
          l2 += d * d;
        }
  CHECK(std::abs(scalar(reconstruction_loss(a, b)) - l1 / count) < 1e-12);
  CHECK(std::abs(scalar(reconstruction_loss(a, b, RecNorm::L2)) - l2 / count) < 1e-12);
}

TEST_CASE("attribute classification loss") {
  auto half = torch::full({5, 3}, 0.5, opts64());
  auto targets = (torch::rand({5, 3}) > 0.5).to(torch::kFloat64);
  CHECK(std::abs(scalar(attr_cls_loss(half, targets)) - 3 * std::log(2.0)) < 1e-6);

  // at the targets the loss is bounded by the clamp
  const double bound = -3 * std::log(1 - kProbEps);
  CHECK(scalar(attr_cls_loss(targets, targets)) <= bound + 1e-9);

  auto p = torch::rand({6, 4}, opts64()) * 0.98 + 0.01;
  auto t = (torch::rand({6, 4}) > 0.5).to(torch::kFloat64);
  auto pp = p.accessor<double, 2>(), tt = t.accessor<double, 2>();
  double total = 0;
  for (int n = 0; n < 6; ++n)
    for (int i = 0; i < 4; ++i) total -= tt[n][i] * std::log(pp[n][i]) + (1 - tt[n][i]) * std::log(1 - pp[n][i]);
  CHECK(std::abs(scalar(attr_cls_loss(p, t)) - total / 6) < 1e-6);

  CHECK_THROWS_AS(attr_cls_loss(torch::full({1, 2}, NAN), torch::ones({1, 2})), NumericalError);
  CHECK_THROWS_AS(attr_cls_loss(torch::rand({2, 3}), torch::ones({2, 2})), ShapeError);
}

TEST_CASE("adversarial losses") {
  auto one = torch::ones({4}, opts64()), zero = torch::zeros({4}, opts64());
  CHECK(scalar(adv_loss_d(one, one, zero, zero)) == doctest::Approx(-2.0).epsilon(1e-12));
  auto same = torch::full({4}, 0.7, opts64());
  CHECK(std::abs(scalar(adv_loss_d(same, same, same, same))) < 1e-12);
  CHECK(scalar(adv_loss_g(one, one)) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(scalar(adv_loss_g(zero, zero)) == 0.0);

  auto a = torch::randn({5}, opts64()), b = torch::randn({5}, opts64());
  auto c = torch::randn({5}, opts64()), d = torch::randn({5}, opts64());
  double ma = 0, mb = 0, mc = 0, md = 0;
  for (int i = 0; i < 5; ++i) {
    ma += a[i].item<double>() / 5;
    mb += b[i].item<double>() / 5;
    mc += c[i].item<double>() / 5;
    md += d[i].item<double>() / 5;
  }
  CHECK(std::abs(scalar(adv_loss_d(a, b, c, d)) - (-ma - mb + mc + md)) < 1e-12);
  CHECK(std::abs(scalar(adv_loss_g(c, d)) - (-mc - md)) < 1e-12);
}

TEST_CASE("gradient penalty closed forms") {
  auto real = torch::randn({6, 3, 4, 4}, opts64()), fake = torch::randn({6, 3, 4, 4}, opts64());
  auto w = torch::randn({3 * 4 * 4}, opts64());
  w = w / w.norm();
  CriticFn linear = [&](const torch::Tensor& x) { return x.flatten(1).matmul(w); };
  CriticFn tripled = [&](const torch::Tensor& x) { return 3.0 * x.flatten(1).matmul(w); };
  CriticFn flat = [](const torch::Tensor& x) { return x.flatten(1).sum(1) * 0.0 + 5.0; };
  CriticFn detached = [](const torch::Tensor& x) { return torch::full({x.size(0)}, 5.0, x.options()); };
  CHECK(std::abs(scalar(gradient_penalty(linear, real, fake, 1))) < 1e-12);
  CHECK(std::abs(scalar(gradient_penalty(tripled, real, fake, 1)) - 4.0) < 1e-9);
  CHECK(std::abs(scalar(gradient_penalty(flat, real, fake, 1)) - 1.0) < 1e-12);
  CHECK(std::abs(scalar(gradient_penalty(detached, real, fake, 1)) - 1.0) < 1e-12);

  // quadratic critic: the penalty depends on the seeded interpolation point
  CriticFn quad = [](const torch::Tensor& x) { return x.flatten(1).pow(2).sum(1); };
  CHECK(scalar(gradient_penalty(quad, real, fake, 3)) == scalar(gradient_penalty(quad, real, fake, 3)));
  CHECK(scalar(gradient_penalty(quad, real, fake, 3)) != scalar(gradient_penalty(quad, real, fake, 4)));
}

TEST_CASE("weighted totals") {
  LossWeights w;
  auto zero = total_losses(LossComponents{}, w);
  CHECK(zero.total_g == 0.0);
  CHECK(zero.total_d == 0.0);
  CHECK(zero.total_c == 0.0);
  LossComponents rec;
  rec.rec = 1;
  CHECK(total_losses(rec, w).total_g == doctest::Approx(100.0).epsilon(1e-12));
  LossComponents cls;
  cls.cls_g = 1;
  CHECK(total_losses(cls, w).total_g == doctest::Approx(10.0).epsilon(1e-12));
  LossComponents mixed{0.25, 0.5, 0.75, -2.0, 3.0, 0.125};
  auto r = total_losses(mixed, w);
  CHECK(std::abs(r.total_g - (-2.0 + 10 * 0.5 + 100 * 0.25)) < 1e-12);
  CHECK(std::abs(r.total_d - (3.0 + 10 * 0.125)) < 1e-12);
  CHECK(r.total_c == 0.75);
  CHECK(first_non_finite(r).empty());
  mixed.gp = NAN;
  CHECK(first_non_finite(total_losses(mixed, w)) == "gradient_penalty");

  LossWeights bad;
  bad.lambda_rec = -1;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

namespace {

// 8x8 images, four-channel latent split into two blocks, in float64.
struct Miniature {
  RunConfig cfg;
  MulGanModel model;
  LabeledBatch a, b;

  Miniature() {
    cfg.model.image_size = 8;
    cfg.model.n_attrs = 2;
    cfg.model.down_layers = 2;
    cfg.model.base_channels = 4;
    cfg.model.max_channels = 4;
    cfg.model.critic_layers = 3;
    cfg.model.critic_base_channels = 4;
    cfg.data.sprite_attrs = {"glasses", "smile"};
    validate(cfg);
    model = MulGanModel::build(cfg.model, 21);
    model.to(torch::kFloat64);
    torch::manual_seed(3);
    a = {torch::rand({3, 3, 8, 8}, opts64()) * 2 - 1, torch::tensor({{1., 0.}, {0., 1.}, {1., 1.}}, opts64())};
    b = {torch::rand({3, 3, 8, 8}, opts64()) * 2 - 1, torch::tensor({{0., 1.}, {0., 0.}, {1., 0.}}, opts64())};
  }

  torch::Tensor objective() {
    auto fw = forward_pass(model.generator, a.images, a.labels, b.images, b.labels);
    return generator_objective(model.critic, fw, a, b, cfg).total;
  }
};

}  // namespace

TEST_CASE("generator objective gradients match central differences") {
  Miniature mini;
  REQUIRE(latent_channels(mini.cfg.model) == 4);
  auto params = mini.model.generator->parameters();
  for (auto& p : params) p.mutable_grad() = torch::Tensor();
  mini.objective().backward();

  const double h = 1e-6;  // larger steps cross LeakyReLU and L1 kinks
  int checked = 0;
  double worst = 0;
  torch::NoGradGuard ng;
  for (auto& p : params) {
    auto flat = p.view(-1);
    auto grad = p.grad().view(-1);
    const int64_t step = std::max<int64_t>(1, flat.numel() / 6);
    for (int64_t k = 0; k < flat.numel(); k += step) {
      const double orig = flat[k].item<double>();
      flat[k] = orig + h;
      const double up = scalar(mini.objective());
      flat[k] = orig - h;
      const double down = scalar(mini.objective());
      flat[k] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grad[k].item<double>();
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
      ++checked;
    }
  }
  CAPTURE(worst);
  CHECK(checked > 20);
  CHECK(worst < 1e-3);
}

TEST_CASE("no gradient reaches label-zeroed blocks") {
  Miniature mini;
  auto raw_a = mini.model.generator->encode(mini.a.images);
  auto raw_b = mini.model.generator->encode(mini.b.images);
  raw_a.retain_grad();
  raw_b.retain_grad();
  auto fw = decode_pass(mini.model.generator, raw_a, mini.a.labels, raw_b, mini.b.labels);
  generator_objective(mini.model.critic, fw, mini.a, mini.b, mini.cfg).total.backward();

  const int64_t block = latent_channels(mini.cfg.model) / 2 / 2;
  int zero_blocks = 0;
  for (auto [raw, labels] : {std::pair{raw_a, mini.a.labels}, std::pair{raw_b, mini.b.labels}}) {
    for (int64_t n = 0; n < labels.size(0); ++n)
      for (int i = 0; i < 2; ++i) {
        auto g = raw.grad()[n].slice(0, i * block, (i + 1) * block).abs().max().item<double>();
        if (labels[n][i].item<double>() == 0) {
          CHECK(g <= 1e-10);
          ++zero_blocks;
        } else {
          CHECK(g > 0);
        }
      }
  }
  CHECK(zero_blocks >= 3);
}
