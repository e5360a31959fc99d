#pragma once

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "dataset.hpp"
#include "editing.hpp"
#include "evaluation.hpp"
#include "oracle.hpp"

namespace mulgan {

const char* library_version();

/// Builds the image source described by the data section.
std::shared_ptr<const ImageSource> make_source(const RunConfig& cfg);

/// Config echo, code version, seed and command, plus `hash`: a digest of
/// everything except the creation timestamp.
nlohmann::json make_manifest(const RunConfig& cfg, const std::string& command);
std::string manifest_hash(const nlohmann::json& manifest);
void write_manifest(const std::filesystem::path& dir, const nlohmann::json& manifest);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Oracle options used whenever a run trains its own oracle.
OracleOptions default_oracle_options(std::uint64_t seed);

/// Sources down the left, exemplars across the top, transfers in the body;
/// the top-left cell is blank. Labels left undefined are predicted by the
/// model's classifier head.
struct GridInputs {
  torch::Tensor sources;    // (R,3,S,S)
  torch::Tensor exemplars;  // (C,3,S,S)
  torch::Tensor src_labels;  // (R,n) or undefined
  torch::Tensor ex_labels;   // (C,n) or undefined
  torch::Tensor mask;        // (n)
  MixMode mode = MixMode::Mix;
};
torch::Tensor render_edit_grid(Editor& editor, const GridInputs& in, std::vector<std::string>* warnings);

struct AblationOptions {
  std::vector<int> d_values{3, 4, 5};
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> oracle_path;  // trained on the fly when absent
  EvalOptions eval;
  int montage_pairs = 2;
};

struct AblationRun {
  int down_layers = 0;
  EvalReport report;
  double seconds = 0;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  std::filesystem::path montage;
  nlohmann::json to_json() const;
};

/// One model per depth with the same seed, data order and step budget. Each
/// run lives in out_dir/d<depth>/; out_dir gets ablation.json and a montage
/// with one row per (depth, sample pair): source, exemplar, reconstruction,
/// each single-attribute transfer, then the all-attribute transfer.
AblationResult run_ablation(const RunConfig& base, const AblationOptions& opts);

}  // namespace mulgan
