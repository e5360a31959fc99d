#include "mulgan/mulgan.h"

#include <c10/util/Exception.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "editing.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "image_io.hpp"
#include "oracle.hpp"
#include "runner.hpp"
#include "seeding.hpp"
#include "training.hpp"

struct mulgan_config {
  mulgan::RunConfig cfg;
};

struct mulgan_model {
  mulgan::RunConfig cfg;
  int64_t step = 0;
  std::unique_ptr<mulgan::Editor> editor;
};

struct mulgan_oracle {
  std::unique_ptr<mulgan::Oracle> oracle;
};

namespace {

thread_local std::string g_last_error;

struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class F>
mulgan_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return MULGAN_OK;
  } catch (const mulgan::Error& e) {
    g_last_error = e.what();
    return static_cast<mulgan_status>(static_cast<int>(e.kind()));
  } catch (const ArgumentError& e) {
    g_last_error = e.what();
    return MULGAN_ERR_ARGUMENT;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return MULGAN_ERR_PARSE;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return MULGAN_ERR_IO;
  } catch (const c10::Error& e) {
    g_last_error = e.what_without_backtrace();
    return MULGAN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MULGAN_ERR_UNKNOWN;
  } catch (...) {
    g_last_error = "unknown failure";
    return MULGAN_ERR_UNKNOWN;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw ArgumentError(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void hand_out(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

int image_size_of(const mulgan_model* m) { return m->cfg.model.image_size; }
int n_attrs_of(const mulgan_model* m) { return m->cfg.model.n_attrs; }

torch::Tensor image_from(const float* data, int size) {
  return torch::from_blob(const_cast<float*>(data), {3, size, size}, torch::kFloat32).clone();
}

torch::Tensor labels_from(const int* data, int n) {
  auto t = torch::empty({n}, torch::kFloat32);
  for (int i = 0; i < n; ++i) {
    if (data[i] != 0 && data[i] != 1) throw mulgan::ValidationError("label and mask entries must be 0 or 1");
    t[i] = static_cast<float>(data[i]);
  }
  return t;
}

void copy_image(const torch::Tensor& img, float* out) {
  auto c = img.to(torch::kFloat32).contiguous();
  std::memcpy(out, c.data_ptr<float>(), static_cast<size_t>(c.numel()) * sizeof(float));
}

// Labels given by the caller, or the classifier head's guess with a warning.
torch::Tensor labels_or_predicted(mulgan_model* m, const int* given, const torch::Tensor& image, const char* who,
                                  std::vector<std::string>& warnings) {
  if (given) return labels_from(given, n_attrs_of(m));
  warnings.push_back(std::string(who) + " labels not given; using the classifier head's prediction");
  return m->editor->predict_labels(image);
}

mulgan::MixMode to_mode(mulgan_mix_mode mode) {
  switch (mode) {
    case MULGAN_MIX: return mulgan::MixMode::Mix;
    case MULGAN_REPLACE: return mulgan::MixMode::Replace;
  }
  throw ArgumentError("unknown mix mode");
}

std::vector<size_t> split_indices(const mulgan::ImageSource& src, const std::string& which) {
  if (which == "train") return src.split().train;
  if (which == "val") return src.split().val;
  if (which == "test") return src.split().test;
  throw ArgumentError("split must be train, val or test");
}

}  // namespace

extern "C" {

const char* mulgan_version(void) { return mulgan::library_version(); }

const char* mulgan_last_error(void) { return g_last_error.c_str(); }

const char* mulgan_status_name(mulgan_status status) {
  switch (status) {
    case MULGAN_OK: return "ok";
    case MULGAN_ERR_UNKNOWN: return "error";
    case MULGAN_ERR_CONFIG: return "config error";
    case MULGAN_ERR_NUMERICAL: return "numerical error";
    case MULGAN_ERR_IO: return "I/O error";
    case MULGAN_ERR_PARSE: return "parse error";
    case MULGAN_ERR_SHAPE: return "shape error";
    case MULGAN_ERR_VALIDATION: return "validation error";
    case MULGAN_ERR_INTERNAL: return "internal error";
    case MULGAN_ERR_ARGUMENT: return "invalid argument";
  }
  return "unrecognised status";
}

void mulgan_string_free(char* s) { std::free(s); }

mulgan_status mulgan_config_default(mulgan_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mulgan_config{mulgan::parse_config(nlohmann::json::object())};
  });
}

mulgan_status mulgan_config_load(const char* path, mulgan_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mulgan_config{mulgan::load_config(path)};
  });
}

mulgan_status mulgan_config_parse(const char* json_text, mulgan_config** out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    nlohmann::json doc;
    try {
      doc = std::strlen(json_text) ? nlohmann::json::parse(json_text) : nlohmann::json::object();
    } catch (const nlohmann::json::parse_error& e) {
      throw mulgan::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    *out = new mulgan_config{mulgan::parse_config(doc)};
  });
}

mulgan_status mulgan_config_set(mulgan_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    mulgan::set_config_value(cfg->cfg, key, value);
  });
}

mulgan_status mulgan_config_apply_env(mulgan_config* cfg, const char* prefix) {
  return guarded([&] {
    require(cfg, "cfg");
    mulgan::apply_env_overrides(cfg->cfg, prefix ? prefix : "MULGAN_");
  });
}

mulgan_status mulgan_config_validate(mulgan_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    mulgan::validate(cfg->cfg);
  });
}

mulgan_status mulgan_config_to_json(const mulgan_config* cfg, char** out_json) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_json, "out_json");
    hand_out(out_json, mulgan::to_json(cfg->cfg).dump(2));
  });
}

mulgan_status mulgan_config_keys(char** out_keys) {
  return guarded([&] {
    require(out_keys, "out_keys");
    hand_out(out_keys, join_lines(mulgan::config_keys()));
  });
}

void mulgan_config_free(mulgan_config* cfg) { delete cfg; }

mulgan_status mulgan_train(mulgan_config* cfg, const char* resume_from, mulgan_step_callback cb, void* user) {
  return guarded([&] {
    require(cfg, "cfg");
    mulgan::validate(cfg->cfg);
    const std::filesystem::path out_dir = cfg->cfg.out_dir;
    mulgan::write_manifest(out_dir, mulgan::make_manifest(cfg->cfg, "train"));
    auto source = mulgan::make_source(cfg->cfg);
    mulgan::TrainOptions opts;
    opts.out_dir = out_dir;
    if (resume_from && *resume_from) opts.resume_from = resume_from;
    if (cb)
      opts.on_step = [&](int64_t step, const mulgan::LossReport& r) {
        return cb(step, mulgan::log_record(step, r).dump().c_str(), user) == 0;
      };
    mulgan::train(cfg->cfg, source, opts);
  });
}

mulgan_status mulgan_train_oracle(mulgan_config* cfg, int steps, const char* out_path, char** out_accuracy_json) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_path, "out_path");
    mulgan::validate(cfg->cfg);
    auto source = mulgan::make_source(cfg->cfg);
    auto opts = mulgan::default_oracle_options(cfg->cfg.seed);
    if (steps > 0) opts.steps = steps;
    auto oracle = mulgan::train_oracle(*source, opts);
    oracle.save(out_path);
    auto held_out = source->split().test.empty() ? source->split().val : source->split().test;
    nlohmann::json acc = nlohmann::json::object();
    if (!held_out.empty()) {
      auto rates = mulgan::oracle_accuracy(oracle, *source, held_out);
      for (size_t i = 0; i < rates.size(); ++i) acc[source->attribute_names()[i]] = rates[i];
    }
    hand_out(out_accuracy_json, nlohmann::json{{"accuracy", acc}, {"n_images", held_out.size()}}.dump(2));
  });
}

mulgan_status mulgan_export_images(mulgan_config* cfg, const char* split, int n, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(split, "split");
    require(out_dir, "out_dir");
    if (n <= 0) throw ArgumentError("n must be positive");
    mulgan::validate(cfg->cfg);
    auto source = mulgan::make_source(cfg->cfg);
    auto idx = split_indices(*source, split);
    if (idx.size() > static_cast<size_t>(n)) idx.resize(static_cast<size_t>(n));
    const std::filesystem::path dir = out_dir;
    std::filesystem::create_directories(dir);
    std::ofstream labels(dir / "labels.txt");
    if (!labels) throw mulgan::IoError("cannot write " + (dir / "labels.txt").string());
    labels << "file";
    for (const auto& a : source->attribute_names()) labels << ' ' << a;
    labels << '\n';
    for (size_t k = 0; k < idx.size(); ++k) {
      const size_t one[] = {idx[k]};
      auto batch = source->load(one);
      const std::string name = std::string(split) + "_" + std::to_string(k) + ".png";
      mulgan::write_png(dir / name, batch.images[0]);
      labels << name;
      for (int v : source->labels_of(idx[k])) labels << ' ' << v;
      labels << '\n';
    }
  });
}

mulgan_status mulgan_model_load(const char* checkpoint_path, mulgan_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    auto ck = mulgan::load_checkpoint(checkpoint_path);
    auto m = std::make_unique<mulgan_model>();
    m->cfg = ck.config;
    m->step = ck.state.step;
    m->editor = std::make_unique<mulgan::Editor>(ck.state.model);
    *out = m.release();
  });
}

void mulgan_model_free(mulgan_model* model) { delete model; }

mulgan_status mulgan_model_info(const mulgan_model* model, int* image_size, int* n_attrs, int64_t* step) {
  return guarded([&] {
    require(model, "model");
    if (image_size) *image_size = image_size_of(model);
    if (n_attrs) *n_attrs = n_attrs_of(model);
    if (step) *step = model->step;
  });
}

mulgan_status mulgan_model_config(const mulgan_model* model, mulgan_config** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = new mulgan_config{model->cfg};
  });
}

mulgan_status mulgan_reconstruct(mulgan_model* model, const float* image, const int* labels, float* out) {
  return guarded([&] {
    require(model, "model");
    require(image, "image");
    require(labels, "labels");
    require(out, "out");
    auto img = image_from(image, image_size_of(model));
    copy_image(model->editor->reconstruct(img, labels_from(labels, n_attrs_of(model))), out);
  });
}

mulgan_status mulgan_predict_labels(mulgan_model* model, const float* image, int* out_labels) {
  return guarded([&] {
    require(model, "model");
    require(image, "image");
    require(out_labels, "out_labels");
    auto p = model->editor->predict_labels(image_from(image, image_size_of(model)));
    for (int i = 0; i < n_attrs_of(model); ++i) out_labels[i] = p[i].item<float>() > 0.5f ? 1 : 0;
  });
}

mulgan_status mulgan_transfer(mulgan_model* model, const float* source, const float* exemplar, const int* src_labels,
                              const int* ex_labels, const int* mask, mulgan_mix_mode mode, float* out,
                              char** out_warnings) {
  return guarded([&] {
    require(model, "model");
    require(source, "source");
    require(exemplar, "exemplar");
    require(mask, "mask");
    require(out, "out");
    const int s = image_size_of(model);
    auto src = image_from(source, s), ex = image_from(exemplar, s);
    std::vector<std::string> warnings;
    torch::Tensor sl;
    if (mode == MULGAN_MIX) sl = labels_or_predicted(model, src_labels, src, "source", warnings);
    auto el = labels_or_predicted(model, ex_labels, ex, "exemplar", warnings);
    auto img = model->editor->transfer(src, ex, sl, el, labels_from(mask, n_attrs_of(model)), to_mode(mode), &warnings);
    copy_image(img, out);
    hand_out(out_warnings, join_lines(warnings));
  });
}

mulgan_status mulgan_edit_files(mulgan_model* model, const char* source_path, const char* exemplar_path,
                                const int* src_labels, const int* ex_labels, const int* mask, mulgan_mix_mode mode,
                                const char* out_path, char** out_warnings) {
  return guarded([&] {
    require(model, "model");
    require(source_path, "source_path");
    require(exemplar_path, "exemplar_path");
    require(mask, "mask");
    require(out_path, "out_path");
    const int s = image_size_of(model);
    auto src = mulgan::read_image(source_path, s), ex = mulgan::read_image(exemplar_path, s);
    std::vector<std::string> warnings;
    torch::Tensor sl;
    if (mode == MULGAN_MIX) sl = labels_or_predicted(model, src_labels, src, "source", warnings);
    auto el = labels_or_predicted(model, ex_labels, ex, "exemplar", warnings);
    auto img = model->editor->transfer(src, ex, sl, el, labels_from(mask, n_attrs_of(model)), to_mode(mode), &warnings);
    mulgan::write_png(out_path, img.to(torch::kFloat32));
    hand_out(out_warnings, join_lines(warnings));
  });
}

mulgan_status mulgan_edit_grid(mulgan_model* model, const char* const* source_paths, int n_sources,
                               const char* const* exemplar_paths, int n_exemplars, const int* mask,
                               mulgan_mix_mode mode, const char* out_path, char** out_warnings) {
  return guarded([&] {
    require(model, "model");
    require(source_paths, "source_paths");
    require(exemplar_paths, "exemplar_paths");
    require(mask, "mask");
    require(out_path, "out_path");
    if (n_sources < 1 || n_exemplars < 1) throw ArgumentError("the grid needs at least one source and one exemplar");
    const int s = image_size_of(model);
    auto load_all = [&](const char* const* paths, int n) {
      std::vector<torch::Tensor> v;
      for (int i = 0; i < n; ++i) {
        require(paths[i], "image path");
        v.push_back(mulgan::read_image(paths[i], s));
      }
      return torch::stack(v);
    };
    mulgan::GridInputs in;
    in.sources = load_all(source_paths, n_sources);
    in.exemplars = load_all(exemplar_paths, n_exemplars);
    in.mask = labels_from(mask, n_attrs_of(model));
    in.mode = to_mode(mode);
    std::vector<std::string> warnings{"grid labels are predicted by the classifier head"};
    mulgan::write_png(out_path, mulgan::render_edit_grid(*model->editor, in, &warnings));
    hand_out(out_warnings, join_lines(warnings));
  });
}

mulgan_status mulgan_oracle_load(const char* path, mulgan_oracle** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mulgan_oracle{std::make_unique<mulgan::Oracle>(mulgan::Oracle::load(path))};
  });
}

void mulgan_oracle_free(mulgan_oracle* oracle) { delete oracle; }

mulgan_status mulgan_eval(mulgan_model* model, mulgan_config* data_cfg, mulgan_oracle* oracle, int n_images,
                          const char* out_path, char** out_report_json) {
  return guarded([&] {
    require(model, "model");
    require(oracle, "oracle");
    mulgan::RunConfig rc = model->cfg;
    if (data_cfg) {
      rc.data = data_cfg->cfg.data;
      rc.seed = data_cfg->cfg.seed;
    }
    mulgan::validate(rc);
    auto source = mulgan::make_source(rc);
    mulgan::EvalOptions opts;
    if (n_images > 0) opts.n_images = n_images;
    opts.seed = mulgan::derive_seed(rc.seed, "eval");
    auto report = mulgan::evaluate(*model->editor, *source, *oracle->oracle, opts);
    report.config = mulgan::to_json(model->cfg);
    auto j = report.to_json();
    j["checkpoint_step"] = model->step;
    if (out_path && *out_path) mulgan::write_json(out_path, j);
    hand_out(out_report_json, j.dump(2));
  });
}

mulgan_status mulgan_ablate(mulgan_config* cfg, const int* depths, int n_depths, const char* out_dir,
                            const char* oracle_path, int n_images, char** out_report_json) {
  return guarded([&] {
    require(cfg, "cfg");
    require(depths, "depths");
    require(out_dir, "out_dir");
    if (n_depths < 1) throw ArgumentError("at least one depth is required");
    mulgan::AblationOptions opts;
    opts.d_values.assign(depths, depths + n_depths);
    opts.out_dir = out_dir;
    if (oracle_path && *oracle_path) opts.oracle_path = oracle_path;
    if (n_images > 0) opts.eval.n_images = n_images;
    opts.eval.seed = mulgan::derive_seed(cfg->cfg.seed, "eval");
    auto result = mulgan::run_ablation(cfg->cfg, opts);
    hand_out(out_report_json, result.to_json().dump(2));
  });
}

mulgan_status mulgan_frechet_distance(const double* mean1, const double* cov1, const double* mean2,
                                      const double* cov2, int dim, double* out) {
  return guarded([&] {
    require(mean1, "mean1");
    require(cov1, "cov1");
    require(mean2, "mean2");
    require(cov2, "cov2");
    require(out, "out");
    if (dim < 1) throw ArgumentError("dim must be positive");
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    mulgan::FeatureStats a, b;
    a.mean = Eigen::Map<const Eigen::VectorXd>(mean1, dim);
    b.mean = Eigen::Map<const Eigen::VectorXd>(mean2, dim);
    a.cov = Eigen::Map<const RowMajor>(cov1, dim, dim);
    b.cov = Eigen::Map<const RowMajor>(cov2, dim, dim);
    *out = mulgan::frechet_distance(a, b);
  });
}

}  // extern "C"
