#include "celeba.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "errors.hpp"
#include "image_io.hpp"

namespace mulgan {
namespace {

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

}  // namespace

const std::vector<std::string>& default_celeba_attributes() {
  static const std::vector<std::string> names{"Bangs",      "Eyeglasses", "Male",      "Smiling",
                                              "Mustache",   "Blond_Hair", "Pale_Skin", "Mouth_Slightly_Open"};
  return names;
}

CelebAAnnotations parse_celeba_attributes(std::istream& in, const std::vector<std::string>& chosen_attrs) {
  CelebAAnnotations ann;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("attribute file line 1: missing image count");
  size_t declared = 0;
  try {
    declared = std::stoul(line);
  } catch (const std::exception&) {
    throw ParseError("attribute file line 1: expected image count, got '" + line + "'");
  }
  if (!std::getline(in, line)) throw ParseError("attribute file line 2: missing attribute names");
  ann.all_names = tokens(line);
  if (ann.all_names.empty()) throw ParseError("attribute file line 2: no attribute names");

  std::unordered_map<std::string, size_t> column;
  for (size_t i = 0; i < ann.all_names.size(); ++i) column[ann.all_names[i]] = i;
  std::vector<size_t> picked;
  for (const auto& name : chosen_attrs) {
    auto it = column.find(name);
    if (it == column.end())
      throw ConfigError("unknown CelebA attribute '" + name + "'; valid names: " + joined(ann.all_names));
    picked.push_back(it->second);
  }
  if (picked.empty()) throw ConfigError("no CelebA attributes chosen");
  ann.chosen = chosen_attrs;

  size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = tokens(line);
    if (tok.empty()) continue;
    if (tok.size() != ann.all_names.size() + 1)
      throw ParseError("attribute file line " + std::to_string(lineno) + ": expected " +
                       std::to_string(ann.all_names.size() + 1) + " fields, got " + std::to_string(tok.size()));
    AttributeVector row;
    row.reserve(picked.size());
    std::vector<int> values(ann.all_names.size());
    for (size_t i = 0; i < values.size(); ++i) {
      const auto& v = tok[i + 1];
      if (v == "1")
        values[i] = 1;
      else if (v == "-1")
        values[i] = 0;
      else
        throw ParseError("attribute file line " + std::to_string(lineno) + ": value '" + v +
                         "' for " + ann.all_names[i] + " is not -1 or 1");
    }
    for (size_t c : picked) row.push_back(values[c]);
    ann.files.push_back(tok[0]);
    ann.labels.push_back(std::move(row));
  }
  if (ann.files.size() != declared)
    throw ParseError("attribute file declares " + std::to_string(declared) + " images but lists " +
                     std::to_string(ann.files.size()));
  return ann;
}

std::string serialize_labels(const CelebAAnnotations& ann) {
  std::ostringstream out;
  for (size_t r = 0; r < ann.files.size(); ++r) {
    out << ann.files[r];
    for (int v : ann.labels[r]) out << ' ' << v;
    out << '\n';
  }
  return out.str();
}

CelebASource::CelebASource(std::filesystem::path image_dir, const std::filesystem::path& attr_file,
                           const std::vector<std::string>& chosen_attrs, int image_size,
                           const std::optional<std::filesystem::path>& partition_file, CelebASplitSizes sizes)
    : image_dir_(std::move(image_dir)), image_size_(image_size) {
  std::ifstream in(attr_file);
  if (!in) throw IoError("cannot open attribute file " + attr_file.string());
  ann_ = parse_celeba_attributes(in, chosen_attrs);
  split_.n_attrs = static_cast<int>(chosen_attrs.size());
  split_.attribute_names = chosen_attrs;

  if (partition_file) {
    std::ifstream pin(*partition_file);
    if (!pin) throw IoError("cannot open partition file " + partition_file->string());
    std::unordered_map<std::string, int> part;
    std::string line;
    size_t lineno = 0;
    while (std::getline(pin, line)) {
      ++lineno;
      auto tok = tokens(line);
      if (tok.empty()) continue;
      if (tok.size() != 2 || (tok[1] != "0" && tok[1] != "1" && tok[1] != "2"))
        throw ParseError("partition file line " + std::to_string(lineno) + ": expected 'file {0,1,2}'");
      part[tok[0]] = tok[1][0] - '0';
    }
    for (size_t i = 0; i < ann_.files.size(); ++i) {
      auto it = part.find(ann_.files[i]);
      if (it == part.end()) throw ParseError("partition file has no entry for " + ann_.files[i]);
      (it->second == 0 ? split_.train : it->second == 1 ? split_.val : split_.test).push_back(i);
    }
  } else {
    const size_t n = ann_.files.size();
    const size_t n_train = std::min(sizes.train, n);
    const size_t n_val = std::min(sizes.val, n - n_train);
    for (size_t i = 0; i < n; ++i) (i < n_train ? split_.train : i < n_train + n_val ? split_.val : split_.test).push_back(i);
  }
}

LabeledBatch CelebASource::load(std::span<const size_t> indices) const {
  const auto n = static_cast<int64_t>(indices.size());
  LabeledBatch b{torch::empty({n, 3, image_size_, image_size_}), torch::empty({n, split_.n_attrs})};
  for (int64_t k = 0; k < n; ++k) {
    const size_t idx = indices[static_cast<size_t>(k)];
    b.images[k].copy_(read_image(image_dir_ / ann_.files.at(idx), image_size_));
    b.labels[k].copy_(to_label_tensor(ann_.labels[idx])[0]);
  }
  return b;
}

}  // namespace mulgan
