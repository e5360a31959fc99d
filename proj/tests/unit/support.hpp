#pragma once

#include <torch/torch.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "config.hpp"
#include "networks.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mulgan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline bool bit_equal(const torch::Tensor& a, const torch::Tensor& b) {
  return a.sizes() == b.sizes() && a.scalar_type() == b.scalar_type() && torch::equal(a, b);
}

inline double max_abs_diff(const torch::Tensor& a, const torch::Tensor& b) {
  return (a.to(torch::kFloat64) - b.to(torch::kFloat64)).abs().max().item<double>();
}

// Small sprite run that trains in seconds.
inline mulgan::RunConfig tiny_run(int64_t steps = 3) {
  mulgan::RunConfig cfg;
  cfg.model.base_channels = 4;
  cfg.model.max_channels = 16;
  cfg.model.critic_base_channels = 4;
  cfg.model.critic_layers = 3;
  cfg.model.image_size = 16;
  cfg.model.down_layers = 2;
  cfg.train.batch_size = 4;
  cfg.train.n_critic = 2;
  cfg.train.total_steps = steps;
  cfg.train.checkpoint_every = 2;
  cfg.data.n_train = 40;
  cfg.data.n_val = 8;
  cfg.data.n_test = 8;
  cfg.seed = 11;
  mulgan::validate(cfg);
  return cfg;
}

}  // namespace testing
