#include "training.hpp"

#include <fstream>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "seeding.hpp"

namespace mulgan {
namespace {

torch::optim::AdamOptions adam_options(const TrainConfig& t) {
  return torch::optim::AdamOptions(t.lr).betas({t.beta1, t.beta2});
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.requires_grad_(on);
}

// Reads an existing log, keeping only records before `first_step`.
std::vector<std::string> log_prefix(const std::filesystem::path& path, int64_t first_step) {
  std::vector<std::string> keep;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("step")) continue;
    if (j["step"].get<int64_t>() < first_step) keep.push_back(line);
  }
  return keep;
}

}  // namespace

ForwardResult forward_pass(Generator& gen, const torch::Tensor& a, const torch::Tensor& y_a, const torch::Tensor& b,
                           const torch::Tensor& y_b, Decodes which) {
  return decode_pass(gen, gen->encode(a), y_a, gen->encode(b), y_b, which);
}

namespace {
bool needs_swapped(const RunConfig& cfg) { return cfg.train.adversarial || cfg.loss.lambda_g != 0; }
}  // namespace

ForwardResult decode_pass(Generator& gen, const torch::Tensor& raw_a, const torch::Tensor& y_a,
                          const torch::Tensor& raw_b, const torch::Tensor& y_b, Decodes which) {
  const int n = gen->config().n_attrs;
  auto za = filter(split(raw_a, n), y_a);
  auto zb = filter(split(raw_b, n), y_b);
  auto [zc, zd] = swap(za, zb);
  ForwardResult r;
  if (which != Decodes::Swapped) {
    r.a1 = gen->decode(za);
    r.b1 = gen->decode(zb);
  }
  if (which != Decodes::Direct) {
    r.a2 = gen->decode(zc);
    r.b2 = gen->decode(zd);
  }
  r.za = std::move(za);
  r.zb = std::move(zb);
  r.zc = std::move(zc);
  r.zd = std::move(zd);
  return r;
}

GeneratorObjective generator_objective(Critic& critic, const ForwardResult& fw, const LabeledBatch& a,
                                       const LabeledBatch& b, const RunConfig& cfg) {
  const int64_t n = a.size();
  GeneratorObjective o;
  o.rec = 0.5 * (reconstruction_loss(a.images, fw.a1, cfg.train.rec_norm) +
                 reconstruction_loss(b.images, fw.b1, cfg.train.rec_norm));
  if (!needs_swapped(cfg)) {
    o.cls_g = torch::zeros_like(o.rec);
    o.total = cfg.loss.lambda_rec * o.rec;
    return o;
  }
  auto fake = critic->forward(torch::cat({fw.a2, fw.b2}));
  o.cls_g = 0.5 * (attr_cls_loss(fake.probs.slice(0, 0, n), b.labels) +
                   attr_cls_loss(fake.probs.slice(0, n, 2 * n), a.labels));
  o.total = cfg.loss.lambda_g * o.cls_g + cfg.loss.lambda_rec * o.rec;
  if (cfg.train.adversarial) {
    o.adv_g = adv_loss_g(fake.scores.slice(0, 0, n), fake.scores.slice(0, n, 2 * n));
    o.total = o.adv_g + o.total;
  }
  return o;
}

TrainState init_train_state(const RunConfig& cfg) {
  TrainState s;
  s.model = MulGanModel::build(cfg.model, cfg.seed);
  s.opt_g = std::make_unique<torch::optim::Adam>(s.model.generator->parameters(), adam_options(cfg.train));
  s.opt_d = std::make_unique<torch::optim::Adam>(s.model.critic->parameters(), adam_options(cfg.train));
  return s;
}

Trainer::Trainer(RunConfig cfg, std::shared_ptr<const ImageSource> data)
    : Trainer(cfg, data, init_train_state(cfg)) {}

Trainer::Trainer(RunConfig cfg, std::shared_ptr<const ImageSource> data, TrainState state)
    : cfg_(std::move(cfg)),
      data_(std::move(data)),
      state_(std::move(state)),
      sampler_(data_->split().train, derive_seed(cfg_.seed, "data")) {
  if (data_->n_attrs() != cfg_.model.n_attrs)
    throw ConfigError("dataset has " + std::to_string(data_->n_attrs()) + " attributes but model.n_attrs=" +
                      std::to_string(cfg_.model.n_attrs));
  if (data_->image_size() != cfg_.model.image_size)
    throw ConfigError("dataset image size " + std::to_string(data_->image_size()) + " differs from model.image_size=" +
                      std::to_string(cfg_.model.image_size));
  sampler_.set_position(state_.sampler_epoch, state_.sampler_cursor);
}

LabeledBatch Trainer::next_batch() {
  auto idx = sampler_.next(static_cast<size_t>(cfg_.train.batch_size));
  state_.sampler_epoch = sampler_.epoch();
  state_.sampler_cursor = sampler_.cursor();
  return data_->load(idx);
}

void Trainer::critic_update(const LabeledBatch& batch, std::uint64_t pair_seed, std::uint64_t gp_seed,
                            LossComponents& out) {
  auto& m = state_.model;
  auto [A, B] = make_pairs(batch, pair_seed);
  const int64_t n = A.size();

  torch::Tensor fake;
  if (cfg_.train.adversarial) {
    torch::NoGradGuard ng;
    auto fw = forward_pass(m.generator, A.images, A.labels, B.images, B.labels, Decodes::Swapped);
    fake = torch::cat({fw.a2, fw.b2});
  }

  set_requires_grad(*m.critic, true);
  auto real = torch::cat({A.images, B.images});
  auto real_out = m.critic->forward(real);
  auto cls_c = 0.5 * (attr_cls_loss(real_out.probs.slice(0, 0, n), A.labels) +
                      attr_cls_loss(real_out.probs.slice(0, n, 2 * n), B.labels));
  torch::Tensor loss = cls_c;
  if (cfg_.train.adversarial) {
    auto fake_scores = m.critic->score(fake);
    auto adv_d = adv_loss_d(real_out.scores.slice(0, 0, n), real_out.scores.slice(0, n, 2 * n),
                            fake_scores.slice(0, 0, n), fake_scores.slice(0, n, 2 * n));
    auto gp = gradient_penalty([&](const torch::Tensor& x) { return m.critic->score(x); }, real, fake, gp_seed);
    loss = loss + adv_d + cfg_.loss.lambda_gp * gp;
    out.adv_d = adv_d.item<double>();
    out.gp = gp.item<double>();
  } else {
    out.adv_d = 0;
    out.gp = 0;
  }
  out.cls_c = cls_c.item<double>();
  const auto bad = first_non_finite(total_losses(out, cfg_.loss));
  if (!bad.empty())
    throw NumericalError("non-finite " + bad + " in critic update at step " + std::to_string(state_.step + 1));

  state_.opt_d->zero_grad();
  loss.backward();
  state_.opt_d->step();
}

void Trainer::generator_update(const LabeledBatch& batch, std::uint64_t pair_seed, LossComponents& out) {
  auto& m = state_.model;
  auto [A, B] = make_pairs(batch, pair_seed);
  set_requires_grad(*m.critic, false);
  auto fw = forward_pass(m.generator, A.images, A.labels, B.images, B.labels,
                         needs_swapped(cfg_) ? Decodes::All : Decodes::Direct);
  auto obj = generator_objective(m.critic, fw, A, B, cfg_);
  out.rec = obj.rec.item<double>();
  out.cls_g = obj.cls_g.item<double>();
  out.adv_g = obj.adv_g.defined() ? obj.adv_g.item<double>() : 0.0;
  const auto bad = first_non_finite(total_losses(out, cfg_.loss));
  if (!bad.empty())
    throw NumericalError("non-finite " + bad + " in generator update at step " + std::to_string(state_.step + 1));

  state_.opt_g->zero_grad();
  obj.total.backward();
  state_.opt_g->step();
  set_requires_grad(*m.critic, true);
}

LossReport Trainer::train_step() {
  const auto step = static_cast<std::uint64_t>(state_.step);
  LossComponents c;
  for (int k = 0; k < cfg_.train.n_critic; ++k) {
    auto batch = next_batch();
    critic_update(batch, derive_seed(cfg_.seed, "pairs", {step, static_cast<std::uint64_t>(k)}),
                  derive_seed(cfg_.seed, "gp", {step, static_cast<std::uint64_t>(k)}), c);
  }
  auto batch = next_batch();
  generator_update(batch, derive_seed(cfg_.seed, "pairs", {step, static_cast<std::uint64_t>(cfg_.train.n_critic)}), c);
  ++state_.step;
  return total_losses(c, cfg_.loss);
}

nlohmann::json log_record(int64_t step, const LossReport& r) {
  return {{"step", step},
          {"L_rec", r.parts.rec},
          {"L_cls_g", r.parts.cls_g},
          {"L_cls_c", r.parts.cls_c},
          {"L_adv_g", r.parts.adv_g},
          {"L_adv_d", r.parts.adv_d},
          {"gradient_penalty", r.parts.gp},
          {"L_G", r.total_g},
          {"L_D", r.total_d},
          {"L_C", r.total_c}};
}

TrainResult train(const RunConfig& cfg, std::shared_ptr<const ImageSource> data, const TrainOptions& opts) {
  TrainState state;
  if (opts.resume_from) {
    auto ck = load_checkpoint(*opts.resume_from);
    check_same_model(cfg.model, ck.config.model);
    state = std::move(ck.state);
    // Optimizer hyper-parameters follow the current config.
    for (auto* opt : {state.opt_g.get(), state.opt_d.get()})
      for (auto& g : opt->param_groups()) {
        auto& o = static_cast<torch::optim::AdamOptions&>(g.options());
        o.lr(cfg.train.lr).betas({cfg.train.beta1, cfg.train.beta2});
      }
  } else {
    state = init_train_state(cfg);
  }

  Trainer trainer(cfg, std::move(data), std::move(state));
  std::filesystem::create_directories(opts.out_dir);
  const auto log_path = opts.out_dir / "train_log.jsonl";
  const auto ckpt_path = opts.out_dir / "checkpoint.mgck";

  // Rewrite the log so it holds exactly the steps preceding the start point.
  const int64_t start = trainer.state().step;
  auto kept = start > 0 ? log_prefix(log_path, start + 1) : std::vector<std::string>{};
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path.string());
  for (const auto& l : kept) log << l << '\n';

  TrainResult result;
  while (trainer.state().step < cfg.train.total_steps) {
    auto report = trainer.train_step();
    const int64_t step = trainer.state().step;
    log << log_record(step, report).dump() << '\n';
    log.flush();
    result.log.push_back(report);
    if (cfg.train.checkpoint_every > 0 && step % cfg.train.checkpoint_every == 0)
      save_checkpoint(ckpt_path, cfg, trainer.state());
    if (opts.on_step && !opts.on_step(step, report)) break;
  }
  save_checkpoint(ckpt_path, cfg, trainer.state());
  result.state = std::move(trainer.state());
  return result;
}

}  // namespace mulgan
