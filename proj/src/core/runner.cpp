#include "runner.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "celeba.hpp"
#include "errors.hpp"
#include "image_io.hpp"
#include "seeding.hpp"
#include "sprites.hpp"
#include "training.hpp"

#ifndef MULGAN_VERSION
#define MULGAN_VERSION "0.0.0"
#endif

namespace mulgan {

const char* library_version() { return MULGAN_VERSION; }

std::shared_ptr<const ImageSource> make_source(const RunConfig& cfg) {
  const auto& d = cfg.data;
  if (d.kind == "sprites") {
    SpriteSpec spec;
    spec.image_size = cfg.model.image_size;
    spec.attributes = d.sprite_attrs;
    spec.jitter = d.jitter;
    return std::make_shared<SpriteSource>(spec, derive_seed(cfg.seed, "sprites"), static_cast<size_t>(d.n_train),
                                          static_cast<size_t>(d.n_val), static_cast<size_t>(d.n_test));
  }
  if (d.kind == "celeba") {
    if (d.image_dir.empty() || d.attr_file.empty())
      throw ConfigError("data.kind=celeba needs data.image_dir and data.attr_file");
    std::optional<std::filesystem::path> part;
    if (!d.partition_file.empty()) part = d.partition_file;
    return std::make_shared<CelebASource>(d.image_dir, d.attr_file, data_attribute_names(d), cfg.model.image_size,
                                          part,
                                          CelebASplitSizes{static_cast<size_t>(d.celeba_train),
                                                           static_cast<size_t>(d.celeba_val)});
  }
  throw ConfigError("unknown data.kind '" + d.kind + "' (expected sprites or celeba)");
}

std::string manifest_hash(const nlohmann::json& manifest) {
  auto j = manifest;
  j.erase("created_at");
  j.erase("hash");
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
  return os.str();
}

nlohmann::json make_manifest(const RunConfig& cfg, const std::string& command) {
  nlohmann::json m;
  m["command"] = command;
  m["version"] = library_version();
  m["seed"] = cfg.seed;
  m["config"] = to_json(cfg);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream ts;
  ts << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  m["created_at"] = ts.str();
  m["hash"] = manifest_hash(m);
  return m;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& manifest) {
  write_json(dir / "manifest.json", manifest);
}

OracleOptions default_oracle_options(std::uint64_t seed) {
  OracleOptions o;
  o.seed = derive_seed(seed, "oracle");
  return o;
}

torch::Tensor render_edit_grid(Editor& editor, const GridInputs& in, std::vector<std::string>* warnings) {
  if (in.sources.dim() != 4 || in.exemplars.dim() != 4) throw ShapeError("grid inputs must be image batches");
  const int64_t rows = in.sources.size(0), cols = in.exemplars.size(0);
  auto src_labels = in.src_labels.defined() ? in.src_labels : editor.predict_labels(in.sources);
  auto ex_labels = in.ex_labels.defined() ? in.ex_labels : editor.predict_labels(in.exemplars);
  auto blank = torch::ones_like(in.sources[0]);

  std::vector<std::vector<torch::Tensor>> grid;
  std::vector<torch::Tensor> header{blank};
  for (int64_t c = 0; c < cols; ++c) header.push_back(in.exemplars[c]);
  grid.push_back(header);
  for (int64_t r = 0; r < rows; ++r) {
    auto src = in.sources[r].unsqueeze(0).expand({cols, -1, -1, -1}).contiguous();
    auto sl = src_labels[r].unsqueeze(0).expand({cols, -1}).contiguous();
    std::vector<std::string> w;
    auto out = editor.transfer(src, in.exemplars, sl, ex_labels, in.mask, in.mode, &w);
    if (warnings)
      for (auto& s : w)
        if (std::find(warnings->begin(), warnings->end(), s) == warnings->end()) warnings->push_back(s);
    std::vector<torch::Tensor> row{in.sources[r]};
    for (int64_t c = 0; c < cols; ++c) row.push_back(out[c].to(torch::kFloat32));
    grid.push_back(row);
  }
  return make_montage(grid);
}

nlohmann::json AblationResult::to_json() const {
  nlohmann::json j;
  j["note"] = "comparative metrics per down-sampling depth; no ordering across depths is implied";
  j["runs"] = nlohmann::json::array();
  for (const auto& r : runs)
    j["runs"].push_back({{"down_layers", r.down_layers}, {"seconds", r.seconds}, {"report", r.report.to_json()}});
  j["montage"] = montage.string();
  return j;
}

namespace {

// Test-set (source, exemplar) pairs, preferring exemplars that differ on
// every attribute so each transfer column shows a change.
std::vector<std::pair<size_t, size_t>> montage_pairs(const ImageSource& src, int count) {
  auto idx = src.split().test.empty() ? src.split().train : src.split().test;
  std::vector<std::pair<size_t, size_t>> out;
  for (size_t s = 0; s < idx.size() && static_cast<int>(out.size()) < count; s += 8) {
    const auto ls = src.labels_of(idx[s]);
    std::optional<size_t> best;
    int best_diff = -1;
    for (size_t e = 0; e < idx.size() && e < 200; ++e) {
      if (e == s) continue;
      const auto le = src.labels_of(idx[e]);
      int diff = 0;
      for (size_t a = 0; a < ls.size(); ++a) diff += ls[a] != le[a];
      if (diff > best_diff) best_diff = diff, best = e;
      if (diff == static_cast<int>(ls.size())) break;
    }
    if (best) out.emplace_back(idx[s], idx[*best]);
  }
  return out;
}

std::vector<torch::Tensor> montage_row(Editor& editor, const LabeledBatch& src, const LabeledBatch& ex) {
  const int n = static_cast<int>(src.labels.size(1));
  std::vector<torch::Tensor> row{src.images[0], ex.images[0]};
  auto to_f = [](const torch::Tensor& t) { return t.to(torch::kFloat32); };
  row.push_back(to_f(editor.reconstruct(src.images[0], src.labels[0])));
  for (int i = 0; i <= n; ++i) {
    auto mask = i < n ? torch::zeros({n}) : torch::ones({n});
    if (i < n) mask[i] = 1;
    row.push_back(to_f(editor.transfer(src.images[0], ex.images[0], src.labels[0], ex.labels[0], mask, MixMode::Mix)));
  }
  return row;
}

}  // namespace

AblationResult run_ablation(const RunConfig& base, const AblationOptions& opts) {
  if (opts.d_values.empty()) throw ConfigError("ablation needs at least one depth");
  RunConfig probe = base;
  validate(probe);
  auto source = make_source(probe);
  std::filesystem::create_directories(opts.out_dir);

  Oracle oracle = [&] {
    if (opts.oracle_path) return Oracle::load(*opts.oracle_path);
    auto o = train_oracle(*source, default_oracle_options(base.seed));
    o.save(opts.out_dir / "oracle.mgck");
    return o;
  }();

  const auto pairs = montage_pairs(*source, opts.montage_pairs);
  std::vector<std::vector<torch::Tensor>> grid;
  AblationResult result;
  for (int d : opts.d_values) {
    RunConfig cfg = base;
    cfg.model.down_layers = d;
    cfg.out_dir = (opts.out_dir / ("d" + std::to_string(d))).string();
    validate(cfg);
    write_manifest(cfg.out_dir, make_manifest(cfg, "ablate"));
    const auto t0 = std::chrono::steady_clock::now();
    TrainOptions topts;
    topts.out_dir = cfg.out_dir;
    auto trained = train(cfg, source, topts);
    Editor editor(trained.state.model);
    AblationRun run;
    run.down_layers = d;
    run.report = evaluate(editor, *source, oracle, opts.eval);
    run.report.config = to_json(cfg);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(std::filesystem::path(cfg.out_dir) / "report.json", run.report.to_json());
    for (const auto& [s, e] : pairs) {
      const size_t si[] = {s}, ei[] = {e};
      grid.push_back(montage_row(editor, source->load(si), source->load(ei)));
    }
    result.runs.push_back(std::move(run));
  }
  if (!grid.empty()) {
    result.montage = opts.out_dir / "ablation_montage.png";
    write_png(result.montage, make_montage(grid));
  }
  write_json(opts.out_dir / "ablation.json", result.to_json());
  return result;
}

}  // namespace mulgan
