#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "losses.hpp"
#include "networks.hpp"

namespace mulgan {

struct TrainConfig {
  int batch_size = 32;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int n_critic = 5;
  int64_t total_steps = 20000;
  int64_t checkpoint_every = 1000;
  bool adversarial = true;
  RecNorm rec_norm = RecNorm::L1;
};

struct DataConfig {
  std::string kind = "sprites";  // sprites | celeba
  // sprites
  int64_t n_train = 10000;
  int64_t n_val = 1000;
  int64_t n_test = 1000;
  int jitter = 2;
  std::vector<std::string> sprite_attrs{"glasses", "smile", "bangs"};
  // celeba
  std::string image_dir;
  std::string attr_file;
  std::string partition_file;
  std::vector<std::string> celeba_attrs;  // empty: the default eight
  int64_t celeba_train = 160000;
  int64_t celeba_val = 20000;
};

/// Everything needed to replay a run.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  LossWeights loss;
  DataConfig data;
  std::string out_dir = "run";
  std::uint64_t seed = 0;
};

/// Names of every accepted key, dotted ("train.lr", "seed", ...).
std::vector<std::string> config_keys();

/// Fills defaults, applies the document, then validates. Unknown keys and
/// constraint violations throw ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Overrides one dotted key from its textual value ("0.001", "true",
/// "a,b,c" for lists). Does not re-validate.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies environment overrides PREFIX<SECTION>_<KEY>, e.g. MULGAN_TRAIN_LR.
void apply_env_overrides(RunConfig& cfg, const std::string& prefix = "MULGAN_",
                         char** envp = nullptr);

/// Cross-field validation; n_attrs is derived from the data section.
void validate(RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);

/// Dataset attribute names implied by the data section.
std::vector<std::string> data_attribute_names(const DataConfig& d);

}  // namespace mulgan
