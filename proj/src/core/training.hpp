#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "dataset.hpp"
#include "latent.hpp"
#include "losses.hpp"
#include "networks.hpp"

namespace mulgan {

struct ForwardResult {
  torch::Tensor a1, b1, a2, b2;
  FilteredLatent za, zb;  // label-filtered codes of A and B
  FilteredLatent zc, zd;  // swapped codes feeding A2 and B2
};

/// Encode both images, split and filter the codes by their labels, swap the
/// attribute halves and decode the requested images: the direct
/// reconstructions A1, B1, the swapped A2, B2, or all four.
enum class Decodes { All, Swapped, Direct };

ForwardResult forward_pass(Generator& gen, const torch::Tensor& a, const torch::Tensor& y_a, const torch::Tensor& b,
                           const torch::Tensor& y_b, Decodes which = Decodes::All);

/// The same pass starting from raw encoder outputs.
ForwardResult decode_pass(Generator& gen, const torch::Tensor& raw_a, const torch::Tensor& y_a,
                          const torch::Tensor& raw_b, const torch::Tensor& y_b, Decodes which = Decodes::All);

struct GeneratorObjective {
  torch::Tensor total;  // adv_g + lambda_g * cls_g + lambda_rec * rec
  torch::Tensor rec, cls_g, adv_g;  // adv_g is undefined when adversarial training is off
};

/// Generator loss for one pairing. A2 carries B's attribute blocks and is
/// supervised with B's labels; B2 with A's. When the classification weight is
/// zero and adversarial training is off only A1 and B1 are needed, and cls_g
/// is reported as zero.
GeneratorObjective generator_objective(Critic& critic, const ForwardResult& fw, const LabeledBatch& a,
                                       const LabeledBatch& b, const RunConfig& cfg);

/// Parameters, optimizer moments and data position; with the RunConfig this
/// is everything needed to continue a run bit-exactly.
struct TrainState {
  int64_t step = 0;
  MulGanModel model;
  std::unique_ptr<torch::optim::Adam> opt_g;
  std::unique_ptr<torch::optim::Adam> opt_d;
  std::uint64_t sampler_epoch = 0;
  std::uint64_t sampler_cursor = 0;
};

TrainState init_train_state(const RunConfig& cfg);

class Trainer {
 public:
  Trainer(RunConfig cfg, std::shared_ptr<const ImageSource> data);
  Trainer(RunConfig cfg, std::shared_ptr<const ImageSource> data, TrainState state);

  /// n_critic critic/classifier updates, then one generator update.
  /// Throws NumericalError naming the first non-finite loss term.
  LossReport train_step();

  /// One critic+classifier update on `batch`. Fills adv_d, gp and cls_c.
  void critic_update(const LabeledBatch& batch, std::uint64_t pair_seed, std::uint64_t gp_seed, LossComponents& out);
  /// One generator update on `batch`. Fills rec, cls_g and adv_g.
  void generator_update(const LabeledBatch& batch, std::uint64_t pair_seed, LossComponents& out);

  TrainState& state() { return state_; }
  const RunConfig& config() const { return cfg_; }
  const ImageSource& data() const { return *data_; }

 private:
  LabeledBatch next_batch();

  RunConfig cfg_;
  std::shared_ptr<const ImageSource> data_;
  TrainState state_;
  BatchSampler sampler_;
};

/// Structured-text log line for one step.
nlohmann::json log_record(int64_t step, const LossReport& r);

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume_from;
  /// Called after every step; returning false stops early.
  std::function<bool(int64_t, const LossReport&)> on_step;
};

struct TrainResult {
  TrainState state;
  std::vector<LossReport> log;
};

/// Runs steps until train.total_steps, appending to out_dir/train_log.jsonl
/// and checkpointing every train.checkpoint_every steps (plus at the end) to
/// out_dir/checkpoint.mgck. Resuming continues from the stored step.
TrainResult train(const RunConfig& cfg, std::shared_ptr<const ImageSource> data, const TrainOptions& opts);

}  // namespace mulgan
