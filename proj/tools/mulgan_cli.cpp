// Command-line front end. Talks to the library only through mulgan.h.
#include <mulgan/mulgan.h>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Failure {
  mulgan_status status;
  std::string message;
};

int exit_code(mulgan_status s) {
  if (s == MULGAN_OK) return 0;
  if (s == MULGAN_ERR_CONFIG) return kExitConfig;
  if (s == MULGAN_ERR_NUMERICAL) return kExitNumerical;
  return kExitFailure;
}

void check(mulgan_status s, const std::string& context) {
  if (s != MULGAN_OK) throw Failure{s, context + ": " + mulgan_last_error()};
}

struct StringDeleter {
  void operator()(char* s) const { mulgan_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct ConfigDeleter {
  void operator()(mulgan_config* c) const { mulgan_config_free(c); }
};
struct ModelDeleter {
  void operator()(mulgan_model* m) const { mulgan_model_free(m); }
};
struct OracleDeleter {
  void operator()(mulgan_oracle* o) const { mulgan_oracle_free(o); }
};
using Config = std::unique_ptr<mulgan_config, ConfigDeleter>;
using Model = std::unique_ptr<mulgan_model, ModelDeleter>;
using OracleHandle = std::unique_ptr<mulgan_oracle, OracleDeleter>;

void print_warnings(char* raw) {
  OwnedString w(raw);
  if (!w) return;
  std::istringstream in(w.get());
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) std::cerr << "warning: " << line << "\n";
}

std::vector<int> parse_bits(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok != "0" && tok != "1") throw Failure{MULGAN_ERR_CONFIG, std::string(what) + " expects comma separated 0/1 values"};
    out.push_back(tok == "1");
  }
  return out;
}

// Shared config plumbing: file, then MULGAN_* environment, then --set.
struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd, bool with_file = true) {
    if (with_file) cmd->add_option("--config", file, "JSON run configuration");
    cmd->add_option("--set", sets, "override a key, e.g. --set train.total_steps=500")->allow_extra_args(false);
  }

  Config build() const {
    mulgan_config* raw = nullptr;
    if (file.empty())
      check(mulgan_config_default(&raw), "default configuration");
    else
      check(mulgan_config_load(file.c_str(), &raw), "loading " + file);
    Config cfg(raw);
    check(mulgan_config_apply_env(cfg.get(), "MULGAN_"), "environment overrides");
    apply_sets(cfg.get());
    return cfg;
  }

  void apply_sets(mulgan_config* cfg) const {
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Failure{MULGAN_ERR_CONFIG, "--set expects key=value, got '" + kv + "'"};
      check(mulgan_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set " + kv);
    }
  }
};

Model load_model(const std::string& path) {
  mulgan_model* raw = nullptr;
  check(mulgan_model_load(path.c_str(), &raw), "loading checkpoint " + path);
  return Model(raw);
}

int model_attrs(const Model& m) {
  int n = 0;
  check(mulgan_model_info(m.get(), nullptr, &n, nullptr), "model info");
  return n;
}

mulgan_mix_mode parse_mode(const std::string& s) { return s == "replace" ? MULGAN_REPLACE : MULGAN_MIX; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MulGAN: exemplar-based attribute transfer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mulgan_version()));

  // train
  ConfigArgs train_cfg;
  std::string train_data, train_out, train_resume;
  int log_every = 100;
  auto* train = app.add_subcommand("train", "train a model");
  train_cfg.add_to(train);
  train->add_option("--data", train_data, "dataset")->check(CLI::IsMember({"sprites", "celeba"}));
  train->add_option("--out", train_out, "run directory")->required();
  train->add_option("--resume", train_resume, "checkpoint to continue from");
  train->add_option("--log-every", log_every, "print every N steps (0: never)");

  // edit
  std::string edit_ck, edit_out, edit_mask, edit_mode = "mix", edit_src_labels, edit_ex_labels;
  std::vector<std::string> edit_src, edit_ex;
  bool edit_grid = false;
  auto* edit = app.add_subcommand("edit", "transfer attributes from exemplar images");
  edit->add_option("--checkpoint", edit_ck, "trained checkpoint")->required();
  edit->add_option("--src", edit_src, "source image(s)")->required()->delimiter(',');
  edit->add_option("--exemplar", edit_ex, "exemplar image(s)")->required()->delimiter(',');
  edit->add_option("--mask", edit_mask, "attributes to transfer, e.g. 0,1,1")->required();
  edit->add_option("--mode", edit_mode, "mix keeps unselected source attributes; replace zeroes them")
      ->check(CLI::IsMember({"mix", "replace"}));
  edit->add_option("--src-labels", edit_src_labels, "source labels, e.g. 1,0,0");
  edit->add_option("--ex-labels", edit_ex_labels, "exemplar labels");
  edit->add_flag("--grid", edit_grid, "render every source against every exemplar");
  edit->add_option("--out", edit_out, "output PNG")->required();

  // eval
  ConfigArgs eval_cfg;
  std::string eval_ck, eval_data, eval_oracle, eval_out;
  int eval_n = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out images");
  eval_cfg.add_to(eval);
  eval->add_option("--checkpoint", eval_ck, "trained checkpoint")->required();
  eval->add_option("--data", eval_data, "dataset")->check(CLI::IsMember({"sprites", "celeba"}));
  eval->add_option("--oracle", eval_oracle, "oracle classifier file")->required();
  eval->add_option("--out", eval_out, "report JSON path")->required();
  eval->add_option("--n-images", eval_n, "held-out images to use");

  // ablate
  ConfigArgs ablate_cfg;
  std::string ablate_out, ablate_oracle, ablate_d = "3,4,5", ablate_data;
  int ablate_n = 0;
  auto* ablate = app.add_subcommand("ablate", "train and compare several down-sampling depths");
  ablate_cfg.add_to(ablate);
  ablate->add_option("--d", ablate_d, "comma separated depths");
  ablate->add_option("--data", ablate_data, "dataset")->check(CLI::IsMember({"sprites", "celeba"}));
  ablate->add_option("--out", ablate_out, "output directory")->required();
  ablate->add_option("--oracle", ablate_oracle, "oracle file (trained when omitted)");
  ablate->add_option("--n-images", ablate_n, "held-out images per evaluation");

  // train-oracle
  ConfigArgs oracle_cfg;
  std::string oracle_data, oracle_out;
  int oracle_steps = 0;
  auto* oracle = app.add_subcommand("train-oracle", "train the attribute oracle used by eval");
  oracle_cfg.add_to(oracle);
  oracle->add_option("--data", oracle_data, "dataset")->check(CLI::IsMember({"sprites", "celeba"}));
  oracle->add_option("--out", oracle_out, "oracle file")->required();
  oracle->add_option("--steps", oracle_steps, "training steps");

  // export
  ConfigArgs export_cfg;
  std::string export_data, export_out, export_split = "test";
  int export_n = 8;
  auto* exp = app.add_subcommand("export", "write dataset images and labels as PNG files");
  export_cfg.add_to(exp);
  exp->add_option("--data", export_data, "dataset")->check(CLI::IsMember({"sprites", "celeba"}));
  exp->add_option("--split", export_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  exp->add_option("-n,--count", export_n, "number of images");
  exp->add_option("--out", export_out, "output directory")->required();

  // config
  ConfigArgs show_cfg;
  auto* show = app.add_subcommand("config", "print the effective configuration");
  show_cfg.add_to(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  auto set_data = [](mulgan_config* cfg, const std::string& kind) {
    if (!kind.empty()) check(mulgan_config_set(cfg, "data.kind", kind.c_str()), "--data");
  };

  try {
    if (*train) {
      auto cfg = train_cfg.build();
      set_data(cfg.get(), train_data);
      check(mulgan_config_set(cfg.get(), "out_dir", train_out.c_str()), "--out");
      auto cb = [](int64_t step, const char* line, void* user) -> int {
        const int every = *static_cast<int*>(user);
        if (every > 0 && step % every == 0) std::cerr << line << "\n";
        return 0;
      };
      check(mulgan_train(cfg.get(), train_resume.empty() ? nullptr : train_resume.c_str(), cb, &log_every),
            "training");
      std::cout << train_out << "/checkpoint.mgck\n";
    } else if (*edit) {
      auto model = load_model(edit_ck);
      const int n = model_attrs(model);
      auto mask = parse_bits(edit_mask, "--mask");
      if (static_cast<int>(mask.size()) != n)
        throw Failure{MULGAN_ERR_CONFIG, "--mask needs " + std::to_string(n) + " entries"};
      char* warnings = nullptr;
      if (edit_grid) {
        if (!edit_src_labels.empty() || !edit_ex_labels.empty())
          std::cerr << "warning: --src-labels/--ex-labels are ignored in grid mode\n";
        std::vector<const char*> src, ex;
        for (auto& s : edit_src) src.push_back(s.c_str());
        for (auto& s : edit_ex) ex.push_back(s.c_str());
        check(mulgan_edit_grid(model.get(), src.data(), static_cast<int>(src.size()), ex.data(),
                               static_cast<int>(ex.size()), mask.data(), parse_mode(edit_mode), edit_out.c_str(),
                               &warnings),
              "grid edit");
      } else {
        if (edit_src.size() != 1 || edit_ex.size() != 1)
          throw Failure{MULGAN_ERR_CONFIG, "several images need --grid"};
        std::vector<int> sl, el;
        if (!edit_src_labels.empty()) sl = parse_bits(edit_src_labels, "--src-labels");
        if (!edit_ex_labels.empty()) el = parse_bits(edit_ex_labels, "--ex-labels");
        if ((!sl.empty() && static_cast<int>(sl.size()) != n) || (!el.empty() && static_cast<int>(el.size()) != n))
          throw Failure{MULGAN_ERR_CONFIG, "labels need " + std::to_string(n) + " entries"};
        check(mulgan_edit_files(model.get(), edit_src[0].c_str(), edit_ex[0].c_str(), sl.empty() ? nullptr : sl.data(),
                                el.empty() ? nullptr : el.data(), mask.data(), parse_mode(edit_mode),
                                edit_out.c_str(), &warnings),
              "edit");
      }
      print_warnings(warnings);
      std::cout << edit_out << "\n";
    } else if (*eval) {
      auto model = load_model(eval_ck);
      mulgan_config* raw = nullptr;
      if (eval_cfg.file.empty())
        check(mulgan_model_config(model.get(), &raw), "checkpoint configuration");
      else
        check(mulgan_config_load(eval_cfg.file.c_str(), &raw), "loading " + eval_cfg.file);
      Config data(raw);
      check(mulgan_config_apply_env(data.get(), "MULGAN_"), "environment overrides");
      eval_cfg.apply_sets(data.get());
      set_data(data.get(), eval_data);
      mulgan_oracle* oraw = nullptr;
      check(mulgan_oracle_load(eval_oracle.c_str(), &oraw), "loading oracle " + eval_oracle);
      OracleHandle orc(oraw);
      char* report = nullptr;
      check(mulgan_eval(model.get(), data.get(), orc.get(), eval_n, eval_out.c_str(), &report), "evaluation");
      OwnedString owned(report);
      std::cout << report << "\n";
    } else if (*ablate) {
      auto cfg = ablate_cfg.build();
      set_data(cfg.get(), ablate_data);
      std::vector<int> depths;
      std::stringstream ss(ablate_d);
      for (std::string tok; std::getline(ss, tok, ',');) {
        try {
          depths.push_back(std::stoi(tok));
        } catch (const std::exception&) {
          throw Failure{MULGAN_ERR_CONFIG, "--d expects comma separated integers"};
        }
      }
      char* report = nullptr;
      check(mulgan_ablate(cfg.get(), depths.data(), static_cast<int>(depths.size()), ablate_out.c_str(),
                          ablate_oracle.empty() ? nullptr : ablate_oracle.c_str(), ablate_n, &report),
            "ablation");
      OwnedString owned(report);
      std::cout << report << "\n";
    } else if (*oracle) {
      auto cfg = oracle_cfg.build();
      set_data(cfg.get(), oracle_data);
      char* acc = nullptr;
      check(mulgan_train_oracle(cfg.get(), oracle_steps, oracle_out.c_str(), &acc), "oracle training");
      OwnedString owned(acc);
      std::cout << acc << "\n";
    } else if (*exp) {
      auto cfg = export_cfg.build();
      set_data(cfg.get(), export_data);
      check(mulgan_export_images(cfg.get(), export_split.c_str(), export_n, export_out.c_str()), "export");
      std::cout << export_out << "\n";
    } else if (*show) {
      auto cfg = show_cfg.build();
      check(mulgan_config_validate(cfg.get()), "validation");
      char* text = nullptr;
      check(mulgan_config_to_json(cfg.get(), &text), "serialising");
      OwnedString owned(text);
      std::cout << text << "\n";
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << mulgan_status_name(f.status) << "): " << f.message << "\n";
    return exit_code(f.status);
  }
  return 0;
}
