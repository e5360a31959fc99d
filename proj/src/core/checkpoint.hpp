#pragma once

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "config.hpp"
#include "training.hpp"

namespace mulgan {

/// Versioned single-file container: magic "MULGANCK", u32 version, u64
/// header length, a JSON header (kind, metadata, tensor index) and the raw
/// little-endian tensor bytes.
struct TensorArchive {
  std::string kind;
  nlohmann::json meta;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  const torch::Tensor* find(const std::string& name) const;
};

inline constexpr std::uint32_t kArchiveVersion = 1;

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, const TrainState& state);

struct LoadedCheckpoint {
  RunConfig config;
  TrainState state;
};

/// Rebuilds the model from the stored config and loads every parameter,
/// refusing (ShapeError) if any stored shape differs from the rebuilt one.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigError listing the differing model fields, if any.
void check_same_model(const ModelConfig& expected, const ModelConfig& stored);

}  // namespace mulgan
