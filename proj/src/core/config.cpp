#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

#include "celeba.hpp"
#include "errors.hpp"
#include "sprites.hpp"

extern char** environ;

namespace mulgan {
namespace {

using json = nlohmann::json;

struct Field {
  std::string key;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

template <typename T>
T as(const json& j, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError(key + ": expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw ConfigError(key + ": expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw ConfigError(key + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError(key + ": expected a string");
    }
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

template <typename T, typename Member>
Field field(const std::string& key, Member accessor) {
  return {key,
          [key, accessor](RunConfig& c, const json& j) { accessor(c) = as<T>(j, key); },
          [accessor](const RunConfig& c) { return json(accessor(const_cast<RunConfig&>(c))); }};
}

#define MULGAN_FIELD(T, key, expr) field<T>(key, [](RunConfig& c) -> T& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v{
        MULGAN_FIELD(std::uint64_t, "seed", c.seed),
        MULGAN_FIELD(std::string, "out_dir", c.out_dir),
        MULGAN_FIELD(int, "model.image_size", c.model.image_size),
        MULGAN_FIELD(int, "model.n_attrs", c.model.n_attrs),
        MULGAN_FIELD(int, "model.down_layers", c.model.down_layers),
        MULGAN_FIELD(int, "model.base_channels", c.model.base_channels),
        MULGAN_FIELD(int, "model.max_channels", c.model.max_channels),
        MULGAN_FIELD(int, "model.critic_layers", c.model.critic_layers),
        MULGAN_FIELD(int, "model.critic_base_channels", c.model.critic_base_channels),
        MULGAN_FIELD(int, "train.batch_size", c.train.batch_size),
        MULGAN_FIELD(double, "train.lr", c.train.lr),
        MULGAN_FIELD(double, "train.beta1", c.train.beta1),
        MULGAN_FIELD(double, "train.beta2", c.train.beta2),
        MULGAN_FIELD(int, "train.n_critic", c.train.n_critic),
        MULGAN_FIELD(int64_t, "train.total_steps", c.train.total_steps),
        MULGAN_FIELD(int64_t, "train.checkpoint_every", c.train.checkpoint_every),
        MULGAN_FIELD(bool, "train.adversarial", c.train.adversarial),
        MULGAN_FIELD(double, "loss.lambda_g", c.loss.lambda_g),
        MULGAN_FIELD(double, "loss.lambda_rec", c.loss.lambda_rec),
        MULGAN_FIELD(double, "loss.lambda_gp", c.loss.lambda_gp),
        MULGAN_FIELD(std::string, "data.kind", c.data.kind),
        MULGAN_FIELD(int64_t, "data.n_train", c.data.n_train),
        MULGAN_FIELD(int64_t, "data.n_val", c.data.n_val),
        MULGAN_FIELD(int64_t, "data.n_test", c.data.n_test),
        MULGAN_FIELD(int, "data.jitter", c.data.jitter),
        MULGAN_FIELD(std::vector<std::string>, "data.sprite_attrs", c.data.sprite_attrs),
        MULGAN_FIELD(std::string, "data.image_dir", c.data.image_dir),
        MULGAN_FIELD(std::string, "data.attr_file", c.data.attr_file),
        MULGAN_FIELD(std::string, "data.partition_file", c.data.partition_file),
        MULGAN_FIELD(std::vector<std::string>, "data.celeba_attrs", c.data.celeba_attrs),
        MULGAN_FIELD(int64_t, "data.celeba_train", c.data.celeba_train),
        MULGAN_FIELD(int64_t, "data.celeba_val", c.data.celeba_val),
    };
    v.push_back({"loss.rec_norm",
                 [](RunConfig& c, const json& j) {
                   auto s = as<std::string>(j, "loss.rec_norm");
                   if (s == "l1")
                     c.train.rec_norm = RecNorm::L1;
                   else if (s == "l2")
                     c.train.rec_norm = RecNorm::L2;
                   else
                     throw ConfigError("loss.rec_norm: expected \"l1\" or \"l2\", got \"" + s + "\"");
                 },
                 [](const RunConfig& c) { return json(c.train.rec_norm == RecNorm::L1 ? "l1" : "l2"); }});
    return v;
  }();
  return f;
}

#undef MULGAN_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

std::string key_list() {
  std::string s;
  for (const auto& k : config_keys()) s += (s.empty() ? "" : ", ") + k;
  return s;
}

[[noreturn]] void unknown_key(const std::string& key) {
  throw ConfigError("unknown config key '" + key + "'; valid keys: " + key_list());
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out.emplace_back(key, *it);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& f : fields()) k.push_back(f.key);
  return k;
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_null() && !doc.is_object()) throw ConfigError("config document must be an object");
  RunConfig cfg;
  cfg.model.n_attrs = 0;  // derived from the data section unless given
  if (doc.is_object()) {
    std::vector<std::pair<std::string, json>> items;
    flatten(doc, "", items);
    for (const auto& [key, value] : items) {
      const Field* f = find_field(key);
      if (!f) unknown_key(key);
      f->set(cfg, value);
    }
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json doc;
  try {
    doc = text.find_first_not_of(" \t\r\n") == std::string::npos ? json::object() : json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) unknown_key(key);
  const json current = f->get(cfg);
  json v;
  try {
    if (current.is_boolean()) {
      if (value == "true" || value == "1")
        v = true;
      else if (value == "false" || value == "0")
        v = false;
      else
        throw ConfigError(key + ": expected true or false, got '" + value + "'");
    } else if (current.is_number_unsigned()) {
      v = static_cast<std::uint64_t>(std::stoull(value));
    } else if (current.is_number_integer()) {
      v = static_cast<int64_t>(std::stoll(value));
    } else if (current.is_number_float()) {
      v = std::stod(value);
    } else if (current.is_array()) {
      v = split_list(value);
    } else {
      v = value;
    }
  } catch (const std::logic_error&) {
    throw ConfigError(key + ": cannot parse '" + value + "'");
  }
  f->set(cfg, v);
}

void apply_env_overrides(RunConfig& cfg, const std::string& prefix, char** envp) {
  if (!envp) envp = environ;
  for (char** e = envp; e && *e; ++e) {
    const std::string entry(*e);
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string name = entry.substr(prefix.size(), eq - prefix.size());
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
    const Field* match = nullptr;
    for (const auto& f : fields()) {
      std::string flat = f.key;
      std::replace(flat.begin(), flat.end(), '.', '_');
      if (flat == name) match = &f;
    }
    if (!match) unknown_key(entry.substr(0, eq));
    set_config_value(cfg, match->key, entry.substr(eq + 1));
  }
}

std::vector<std::string> data_attribute_names(const DataConfig& d) {
  if (d.kind == "sprites") return d.sprite_attrs;
  if (d.kind == "celeba") return d.celeba_attrs.empty() ? default_celeba_attributes() : d.celeba_attrs;
  throw ConfigError("data.kind must be \"sprites\" or \"celeba\", got \"" + d.kind + "\"");
}

void validate(RunConfig& cfg) {
  const auto names = data_attribute_names(cfg.data);
  const auto attrs_key = cfg.data.kind == "sprites" ? "data.sprite_attrs" : "data.celeba_attrs";
  if (names.empty()) throw ConfigError(std::string(attrs_key) + " must name at least one attribute");
  for (size_t i = 0; i < names.size(); ++i)
    for (size_t j = i + 1; j < names.size(); ++j)
      if (names[i] == names[j]) throw ConfigError(std::string(attrs_key) + " lists '" + names[i] + "' twice");
  if (cfg.model.n_attrs == 0)
    cfg.model.n_attrs = static_cast<int>(names.size());
  else if (cfg.model.n_attrs != static_cast<int>(names.size()))
    throw ConfigError("model.n_attrs=" + std::to_string(cfg.model.n_attrs) + " does not match " + attrs_key + " (" +
                      std::to_string(names.size()) + " names)");

  validate(cfg.model);
  validate(cfg.loss);
  const auto& t = cfg.train;
  if (t.batch_size < 2) throw ConfigError("train.batch_size must be at least 2 to form exemplar pairs");
  if (t.n_critic < 1) throw ConfigError("train.n_critic must be at least 1");
  if (!(t.lr > 0)) throw ConfigError("train.lr must be positive");
  if (!(t.beta1 >= 0 && t.beta1 < 1) || !(t.beta2 >= 0 && t.beta2 < 1))
    throw ConfigError("train.beta1 and train.beta2 must be in [0,1)");
  if (t.total_steps < 0) throw ConfigError("train.total_steps must be >= 0");
  if (t.checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");

  const auto& d = cfg.data;
  if (d.kind == "sprites") {
    if (d.n_train < 0 || d.n_val < 0 || d.n_test < 0) throw ConfigError("data.n_train/n_val/n_test must be >= 0");
    if (d.n_train < t.batch_size)
      throw ConfigError("data.n_train=" + std::to_string(d.n_train) + " is smaller than train.batch_size=" +
                        std::to_string(t.batch_size));
    if (d.jitter < 0 || d.jitter > 3) throw ConfigError("data.jitter must be in [0,3]");
    if (cfg.model.image_size < 8) throw ConfigError("model.image_size must be at least 8 for sprites");
    SpriteSpec spec;
    spec.attributes = d.sprite_attrs;
    spec.image_size = cfg.model.image_size;
    spec.jitter = d.jitter;
    try {
      validate(spec);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("data.sprite_attrs: ") + e.what());
    }
  } else {
    if (d.attr_file.empty()) throw ConfigError("data.attr_file is required when data.kind is \"celeba\"");
    if (d.image_dir.empty()) throw ConfigError("data.image_dir is required when data.kind is \"celeba\"");
    if (d.celeba_train < 0 || d.celeba_val < 0) throw ConfigError("data.celeba_train/celeba_val must be >= 0");
  }
}

nlohmann::json to_json(const RunConfig& cfg) {
  json out = json::object();
  for (const auto& f : fields()) {
    json* node = &out;
    std::stringstream ss(f.key);
    std::vector<std::string> parts;
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    for (size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = f.get(cfg);
  }
  return out;
}

}  // namespace mulgan
