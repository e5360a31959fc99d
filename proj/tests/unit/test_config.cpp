#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include <fstream>

#include "config.hpp"
#include "errors.hpp"
#include "runner.hpp"
#include "support.hpp"

using namespace mulgan;
using nlohmann::json;

namespace {

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("empty document gives the published defaults") {
  auto cfg = parse_config(json::object());
  CHECK(cfg.loss.lambda_g == 10.0);
  CHECK(cfg.loss.lambda_rec == 100.0);
  CHECK(cfg.loss.lambda_gp == 10.0);
  CHECK(cfg.train.lr == 1e-4);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.train.beta1 == 0.5);
  CHECK(cfg.train.beta2 == 0.999);
  CHECK(cfg.model.down_layers == 4);
  CHECK(cfg.model.image_size == 32);
  CHECK(cfg.model.n_attrs == 3);
  CHECK(cfg.data.kind == "sprites");
}

TEST_CASE("unknown keys are listed with the valid ones") {
  auto msg = config_error({{"train", {{"learning_rate", 0.1}}}});
  CHECK(msg.find("train.learning_rate") != std::string::npos);
  CHECK(msg.find("train.lr") != std::string::npos);
  CHECK(config_error({{"bogus", 1}}).find("bogus") != std::string::npos);
  CHECK_FALSE(config_error({{"train", {{"lr", "fast"}}}}).empty());
}

TEST_CASE("cross-field violations name both fields") {
  auto msg = config_error({{"model", {{"image_size", 30}, {"down_layers", 4}}}});
  CHECK(msg.find("model.image_size") != std::string::npos);
  CHECK(msg.find("model.down_layers") != std::string::npos);

  const nlohmann::json celeba_data = {{"kind", "celeba"}, {"image_dir", "img"}, {"attr_file", "attrs.txt"}};
  auto celeba = config_error({{"model", {{"n_attrs", 3}}}, {"data", celeba_data}});
  CHECK(celeba.find("model.n_attrs") != std::string::npos);
  CHECK(celeba.find("data.celeba_attrs") != std::string::npos);

  auto derived = parse_config({{"data", celeba_data}});
  CHECK(config_error({{"data", {{"kind", "celeba"}}}}).find("data.attr_file") != std::string::npos);
  CHECK(config_error({{"data", {{"kind", "faces"}}}}).find("data.kind") != std::string::npos);
  CHECK(derived.model.n_attrs == 8);
  CHECK_FALSE(config_error({{"train", {{"batch_size", 1}}}}).empty());
  CHECK_FALSE(config_error({{"data", {{"sprite_attrs", {"glasses", "hat"}}}}}).empty());
}

TEST_CASE("textual overrides and the environment") {
  auto cfg = parse_config(json::object());
  set_config_value(cfg, "train.lr", "0.002");
  set_config_value(cfg, "train.adversarial", "false");
  set_config_value(cfg, "data.sprite_attrs", "smile,bangs");
  set_config_value(cfg, "model.n_attrs", "2");
  set_config_value(cfg, "loss.rec_norm", "l2");
  CHECK(cfg.train.lr == 0.002);
  CHECK_FALSE(cfg.train.adversarial);
  CHECK(cfg.data.sprite_attrs == std::vector<std::string>{"smile", "bangs"});
  CHECK(cfg.train.rec_norm == RecNorm::L2);
  CHECK_THROWS_AS(set_config_value(cfg, "train.n_critic", "many"), ConfigError);
  CHECK_THROWS_AS(set_config_value(cfg, "train.nope", "1"), ConfigError);
  validate(cfg);
  CHECK(cfg.model.n_attrs == 2);

  std::string e1 = "MULGAN_TRAIN_TOTAL_STEPS=77", e2 = "MULGAN_SEED=5", e3 = "HOME=/tmp", e4 = "MULGAN_MODEL_BASE_CHANNELS=8";
  char* env[] = {e1.data(), e2.data(), e3.data(), e4.data(), nullptr};
  apply_env_overrides(cfg, "MULGAN_", env);
  CHECK(cfg.train.total_steps == 77);
  CHECK(cfg.seed == 5);
  CHECK(cfg.model.base_channels == 8);
  std::string bad = "MULGAN_TRAIN_SPEED=3";
  char* bad_env[] = {bad.data(), nullptr};
  CHECK_THROWS_AS(apply_env_overrides(cfg, "MULGAN_", bad_env), ConfigError);
}

TEST_CASE("documents round trip and load from disk") {
  auto cfg = parse_config({{"seed", 9}, {"train", {{"n_critic", 2}}}, {"model", {{"base_channels", 16}}}});
  CHECK(to_json(parse_config(to_json(cfg))) == to_json(cfg));
  for (const auto& key : config_keys()) CHECK((key.find('.') != std::string::npos || key == "seed" || key == "out_dir"));

  testing::TempDir dir("cfg");
  std::ofstream(dir / "empty.json").flush();
  CHECK(to_json(load_config(dir / "empty.json")) == to_json(parse_config(json::object())));
  std::ofstream(dir / "broken.json") << "{ \"train\": ";
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);
}

TEST_CASE("manifests hash everything except the timestamp") {
  auto cfg = parse_config({{"seed", 3}});
  auto a = make_manifest(cfg, "train"), b = make_manifest(cfg, "train");
  CHECK(a["hash"] == b["hash"]);
  auto c = a;
  c["created_at"] = "1999-01-01T00:00:00Z";
  CHECK(manifest_hash(c) == a["hash"].get<std::string>());
  cfg.seed = 4;
  CHECK(make_manifest(cfg, "train")["hash"] != a["hash"]);
  CHECK(a["config"] == to_json(parse_config({{"seed", 3}})));
  CHECK(a.contains("version"));
}
