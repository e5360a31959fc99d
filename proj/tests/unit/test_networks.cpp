#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include "errors.hpp"
#include "latent.hpp"
#include "networks.hpp"
#include "support.hpp"

using namespace mulgan;

TEST_CASE("latent geometry follows the config") {
  ModelConfig cfg;
  cfg.n_attrs = 4;
  torch::NoGradGuard ng;
  auto model = MulGanModel::build(cfg, 1);
  CHECK(model.generator->encode(torch::zeros({2, 3, 32, 32})).sizes() == torch::IntArrayRef({2, 512, 2, 2}));
  cfg.down_layers = 3;
  auto shallow = MulGanModel::build(cfg, 1);
  CHECK(shallow.generator->encode(torch::zeros({1, 3, 32, 32})).sizes() == torch::IntArrayRef({1, 256, 4, 4}));
  CHECK(latent_channels(cfg) == 256);
  CHECK(latent_spatial(cfg) == 4);
  // three attributes: 256 is rounded up to the next multiple of 6
  cfg.n_attrs = 3;
  CHECK(latent_channels(cfg) == 258);

  ModelConfig odd;
  odd.image_size = 30;
  try {
    validate(odd);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.image_size") != std::string::npos);
    CHECK(std::string(e.what()).find("model.down_layers") != std::string::npos);
  }
  CHECK_THROWS_AS(MulGanModel::build(odd, 0), ConfigError);
}

TEST_CASE("latent width is rounded so it splits evenly") {
  for (int size : {32, 64})
    for (int d : {3, 4, 5})
      for (int n : {1, 3, 8})
        for (int base : {8, 32, 64}) {
          ModelConfig cfg;
          cfg.image_size = size;
          cfg.down_layers = d;
          cfg.n_attrs = n;
          cfg.base_channels = base;
          CHECK_NOTHROW(validate(cfg));
          CHECK(latent_channels(cfg) % (2 * n) == 0);
        }
}

TEST_CASE("round trip through every split configuration") {
  torch::NoGradGuard ng;
  for (int size : {32, 64})
    for (int d : {3, 4, 5})
      for (int n : {1, 3, 8}) {
        ModelConfig cfg;
        cfg.image_size = size;
        cfg.down_layers = d;
        cfg.n_attrs = n;
        auto model = MulGanModel::build(cfg, 3);
        auto x = torch::rand({2, 3, size, size}) * 2 - 1;
        auto y = (torch::rand({2, n}) > 0.5).to(torch::kFloat32);
        auto fa = filter(split(model.generator->encode(x), n), y);
        auto fb = filter(split(model.generator->encode(x.flip(0)), n), y.flip(0));
        auto [zc, zd] = swap(fa, fb);
        CAPTURE(size);
        CAPTURE(d);
        CAPTURE(n);
        auto out = model.generator->decode(zc);
        CHECK(out.sizes() == x.sizes());
        CHECK(model.generator->decode(zd).sizes() == x.sizes());
        auto self = swap(fa, fa).first;
        CHECK(testing::bit_equal(model.generator->decode(self), model.generator->decode(fa)));
      }
}

TEST_CASE("generator is deterministic and bounded") {
  ModelConfig cfg;
  cfg.base_channels = 8;
  torch::NoGradGuard ng;
  auto model = MulGanModel::build(cfg, 4);
  auto x = torch::rand({3, 3, 32, 32}) * 2 - 1;
  auto z = model.generator->encode(x);
  auto a = model.generator->decode(z), b = model.generator->decode(z);
  CHECK(testing::bit_equal(a, b));
  CHECK(a.abs().max().item<float>() <= 1.0f);
  // batch independence: decoding one row alone gives the same row
  CHECK(testing::max_abs_diff(model.generator->decode(z.slice(0, 1, 2)), a.slice(0, 1, 2)) < 1e-5);
  CHECK_THROWS_AS(model.generator->encode(torch::zeros({1, 3, 16, 16})), ShapeError);
  CHECK_THROWS_AS(model.generator->decode(torch::zeros({1, 7, 2, 2})), ShapeError);
}

TEST_CASE("critic contracts") {
  ModelConfig cfg;
  cfg.base_channels = 8;
  torch::NoGradGuard ng;
  auto model = MulGanModel::build(cfg, 5);
  auto x = torch::rand({4, 3, 32, 32}) * 2 - 1;
  auto out = model.critic->forward(x);
  CHECK(out.scores.sizes() == torch::IntArrayRef({4}));
  CHECK(out.probs.sizes() == torch::IntArrayRef({4, 3}));
  CHECK(out.probs.gt(0).all().item<bool>());
  CHECK(out.probs.lt(1).all().item<bool>());
  auto twin = torch::stack({x[0], x[0]});
  auto tw = model.critic->forward(twin);
  CHECK(tw.scores[0].item<float>() == tw.scores[1].item<float>());
  CHECK(torch::equal(tw.probs[0], tw.probs[1]));
  for (int k = 0; k < 100; ++k) {
    auto batch = torch::rand({8, 3, 32, 32}) * 2 - 1;
    CHECK(torch::isfinite(model.critic->score(batch)).all().item<bool>());
  }
}

TEST_CASE("critic layout halves while it can, then keeps size") {
  ModelConfig cfg;
  auto layout = critic_layout(cfg);
  REQUIRE(layout.strides.size() == 6);
  CHECK(layout.strides == std::vector<int>{2, 2, 2, 2, 2, 1});
  CHECK(layout.final_spatial == 1);
  cfg.image_size = 48;  // 48 -> 24 -> 12 -> 6 -> 3, then odd
  cfg.down_layers = 4;
  cfg.critic_layers = 6;
  CHECK(critic_layout(cfg).strides == std::vector<int>{2, 2, 2, 2, 1, 1});
}

TEST_CASE("initialisation is seeded") {
  ModelConfig cfg;
  cfg.base_channels = 8;
  auto a = MulGanModel::build(cfg, 9), b = MulGanModel::build(cfg, 9), c = MulGanModel::build(cfg, 10);
  std::vector<torch::Tensor> pa, pb, pc;
  for (auto& [name, t] : a.named_parameters()) pa.push_back(t);
  for (auto& [name, t] : b.named_parameters()) pb.push_back(t);
  for (auto& [name, t] : c.named_parameters()) pc.push_back(t);
  CHECK(parameter_hash(pa) == parameter_hash(pb));
  CHECK(parameter_hash(pa) != parameter_hash(pc));
  bool prefixed = true;
  for (auto& [name, t] : a.named_parameters())
    prefixed = prefixed && (name.rfind("generator.", 0) == 0 || name.rfind("critic.", 0) == 0);
  CHECK(prefixed);
}
