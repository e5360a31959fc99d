#include "checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "errors.hpp"

namespace mulgan {
namespace {

using json = nlohmann::json;
constexpr char kMagic[8] = {'M', 'U', 'L', 'G', 'A', 'N', 'C', 'K'};

std::string dtype_name(torch::Dtype d) {
  switch (d) {
    case torch::kFloat32: return "float32";
    case torch::kFloat64: return "float64";
    case torch::kInt64: return "int64";
    case torch::kUInt8: return "uint8";
    default: throw InternalError("unsupported tensor dtype in archive");
  }
}

torch::Dtype dtype_from(const std::string& s) {
  if (s == "float32") return torch::kFloat32;
  if (s == "float64") return torch::kFloat64;
  if (s == "int64") return torch::kInt64;
  if (s == "uint8") return torch::kUInt8;
  throw ParseError("archive: unknown dtype '" + s + "'");
}

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("archive: truncated header");
  return v;
}

void export_adam(const torch::optim::Adam& opt, const std::vector<std::pair<std::string, torch::Tensor>>& params,
                 const std::string& prefix, TensorArchive& ar) {
  const auto& st = opt.state();
  for (const auto& [name, p] : params) {
    auto it = st.find(p.unsafeGetTensorImpl());
    if (it == st.end()) continue;
    const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
    ar.tensors.emplace_back(prefix + name + ".step", torch::tensor(s.step(), torch::kInt64));
    ar.tensors.emplace_back(prefix + name + ".exp_avg", s.exp_avg());
    ar.tensors.emplace_back(prefix + name + ".exp_avg_sq", s.exp_avg_sq());
  }
}

void import_adam(torch::optim::Adam& opt, const std::vector<std::pair<std::string, torch::Tensor>>& params,
                 const std::string& prefix, const TensorArchive& ar) {
  for (const auto& [name, p] : params) {
    const auto* step = ar.find(prefix + name + ".step");
    if (!step) continue;
    const auto* m = ar.find(prefix + name + ".exp_avg");
    const auto* v = ar.find(prefix + name + ".exp_avg_sq");
    if (!m || !v) throw ParseError("checkpoint: incomplete optimizer state for " + name);
    if (!m->sizes().equals(p.sizes()) || !v->sizes().equals(p.sizes()))
      throw ShapeError("checkpoint: optimizer state shape mismatch for " + name);
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->step(step->item<int64_t>());
    s->exp_avg(m->clone());
    s->exp_avg_sq(v->clone());
    opt.state()[p.unsafeGetTensorImpl()] = std::move(s);
  }
}

std::vector<std::pair<std::string, torch::Tensor>> with_prefix(const MulGanModel& m, const std::string& prefix) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (auto& np : m.named_parameters())
    if (np.first.rfind(prefix, 0) == 0) out.push_back(np);
  return out;
}

}  // namespace

const torch::Tensor* TensorArchive::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.first == name) return &t.second;
  return nullptr;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  json header;
  header["kind"] = archive.kind;
  header["meta"] = archive.meta;
  header["tensors"] = json::array();
  std::vector<torch::Tensor> data;
  std::uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    auto c = t.detach().contiguous().cpu();
    const std::uint64_t nbytes = static_cast<std::uint64_t>(c.numel()) * c.element_size();
    header["tensors"].push_back(
        {{"name", name}, {"dtype", dtype_name(c.scalar_type())}, {"shape", c.sizes().vec()}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
    data.push_back(c);
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, kArchiveVersion);
    write_pod<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& c : data)
      out.write(static_cast<const char*>(c.data_ptr()), static_cast<std::streamsize>(c.numel() * c.element_size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw ParseError(path.string() + " is not a mulgan archive");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kArchiveVersion)
    throw ParseError(path.string() + ": unsupported archive version " + std::to_string(version));
  const auto hlen = read_pod<std::uint64_t>(in);
  std::string text(hlen, '\0');
  in.read(text.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw ParseError(path.string() + ": truncated header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": corrupt header: " + e.what());
  }
  const auto data_start = in.tellg();

  TensorArchive ar;
  ar.kind = header.at("kind").get<std::string>();
  ar.meta = header.at("meta");
  for (const auto& e : header.at("tensors")) {
    auto shape = e.at("shape").get<std::vector<int64_t>>();
    auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype_from(e.at("dtype").get<std::string>())));
    const auto nbytes = e.at("nbytes").get<std::uint64_t>();
    if (nbytes != static_cast<std::uint64_t>(t.numel()) * t.element_size())
      throw ParseError(path.string() + ": size mismatch for tensor " + e.at("name").get<std::string>());
    in.seekg(data_start + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
    if (!in) throw ParseError(path.string() + ": truncated tensor data");
    ar.tensors.emplace_back(e.at("name").get<std::string>(), t);
  }
  return ar;
}

void check_same_model(const ModelConfig& expected, const ModelConfig& stored) {
  std::string diff;
  auto cmp = [&](const char* name, int a, int b) {
    if (a != b) diff += std::string(diff.empty() ? "" : ", ") + name + ": config " + std::to_string(a) + " vs checkpoint " + std::to_string(b);
  };
  cmp("model.image_size", expected.image_size, stored.image_size);
  cmp("model.n_attrs", expected.n_attrs, stored.n_attrs);
  cmp("model.down_layers", expected.down_layers, stored.down_layers);
  cmp("model.base_channels", expected.base_channels, stored.base_channels);
  cmp("model.max_channels", expected.max_channels, stored.max_channels);
  cmp("model.critic_layers", expected.critic_layers, stored.critic_layers);
  cmp("model.critic_base_channels", expected.critic_base_channels, stored.critic_base_channels);
  if (!diff.empty()) throw ConfigError("checkpoint does not match the configured model (" + diff + ")");
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, const TrainState& state) {
  TensorArchive ar;
  ar.kind = "mulgan-checkpoint";
  ar.meta["config"] = to_json(cfg);
  ar.meta["state"] = {{"step", state.step}, {"sampler_epoch", state.sampler_epoch}, {"sampler_cursor", state.sampler_cursor}};
  for (const auto& np : state.model.named_parameters()) ar.tensors.push_back(np);
  if (state.opt_g) export_adam(*state.opt_g, with_prefix(state.model, "generator."), "optim.", ar);
  if (state.opt_d) export_adam(*state.opt_d, with_prefix(state.model, "critic."), "optim.", ar);
  write_archive(path, ar);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto ar = read_archive(path);
  if (ar.kind != "mulgan-checkpoint") throw ParseError(path.string() + " holds a '" + ar.kind + "', not a model checkpoint");
  LoadedCheckpoint out;
  out.config = parse_config(ar.meta.at("config"));
  out.state = init_train_state(out.config);
  const auto& st = ar.meta.at("state");
  out.state.step = st.at("step").get<int64_t>();
  out.state.sampler_epoch = st.at("sampler_epoch").get<std::uint64_t>();
  out.state.sampler_cursor = st.at("sampler_cursor").get<std::uint64_t>();

  torch::NoGradGuard ng;
  for (auto& [name, p] : out.state.model.named_parameters()) {
    const auto* t = ar.find(name);
    if (!t) throw ShapeError("checkpoint is missing parameter " + name);
    if (!t->sizes().equals(p.sizes()))
      throw ShapeError("checkpoint parameter " + name + " has shape " + c10::str(t->sizes()) + ", model expects " +
                       c10::str(p.sizes()));
    p.copy_(*t);
  }
  import_adam(*out.state.opt_g, with_prefix(out.state.model, "generator."), "optim.", ar);
  import_adam(*out.state.opt_d, with_prefix(out.state.model, "critic."), "optim.", ar);
  return out;
}

}  // namespace mulgan
