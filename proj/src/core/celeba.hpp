#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "dataset.hpp"

namespace mulgan {

/// Parsed attribute annotation: header names and, per row, the file name
/// plus labels remapped to {0,1} for the chosen columns only.
struct CelebAAnnotations {
  std::vector<std::string> all_names;
  std::vector<std::string> chosen;
  std::vector<std::string> files;
  std::vector<AttributeVector> labels;
};

/// Parses the standard list_attr_celeba.txt layout: row count, attribute
/// names, then "file v1 ... vK" with v in {-1,1}. Errors carry line numbers.
CelebAAnnotations parse_celeba_attributes(std::istream& in, const std::vector<std::string>& chosen_attrs);

/// Writes the chosen columns back out ("file 0 1 ..."), one row per image.
std::string serialize_labels(const CelebAAnnotations& ann);

/// The eight attributes used for CelebA transfer experiments.
const std::vector<std::string>& default_celeba_attributes();

struct CelebASplitSizes {
  size_t train = 160000;
  size_t val = 20000;
};

class CelebASource final : public ImageSource {
 public:
  /// `partition_file` (list_eval_partition.txt, "file k" with k in {0,1,2})
  /// takes precedence over the file-order split when given.
  CelebASource(std::filesystem::path image_dir, const std::filesystem::path& attr_file,
               const std::vector<std::string>& chosen_attrs, int image_size,
               const std::optional<std::filesystem::path>& partition_file = std::nullopt,
               CelebASplitSizes sizes = {});

  const DatasetSplit& split() const override { return split_; }
  int image_size() const override { return image_size_; }
  LabeledBatch load(std::span<const size_t> indices) const override;
  AttributeVector labels_of(size_t index) const override { return ann_.labels.at(index); }

  const CelebAAnnotations& annotations() const { return ann_; }

 private:
  std::filesystem::path image_dir_;
  int image_size_;
  CelebAAnnotations ann_;
  DatasetSplit split_;
};

}  // namespace mulgan
