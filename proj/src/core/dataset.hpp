#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mulgan {

/// Binary attribute labels of one image, values in {0,1}.
using AttributeVector = std::vector<int>;

/// Throws ValidationError unless every entry is 0 or 1 and, when
/// `expected_len` is non-negative, the length matches.
void check_binary(const AttributeVector& v, const char* what, long expected_len = -1);

torch::Tensor to_label_tensor(const AttributeVector& v);  // (1, n) float
AttributeVector from_label_tensor(const torch::Tensor& row);

/// Images (N,3,H,W) in [-1,1] and labels (N,n_attrs) in {0,1}, both float32.
struct LabeledBatch {
  torch::Tensor images;
  torch::Tensor labels;

  int64_t size() const { return images.defined() ? images.size(0) : 0; }
  LabeledBatch index_select(const std::vector<int64_t>& rows) const;
};

void check_batch(const LabeledBatch& b);

struct DatasetSplit {
  std::vector<size_t> train;
  std::vector<size_t> val;
  std::vector<size_t> test;
  int n_attrs = 0;
  std::vector<std::string> attribute_names;
};

/// Anything that can deliver labelled images by index.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual const DatasetSplit& split() const = 0;
  virtual int image_size() const = 0;
  virtual LabeledBatch load(std::span<const size_t> indices) const = 0;
  virtual AttributeVector labels_of(size_t index) const = 0;

  int n_attrs() const { return split().n_attrs; }
  const std::vector<std::string>& attribute_names() const { return split().attribute_names; }
};

/// Epoch-wise shuffled, drop-last batching over a list of indices. The
/// permutation of epoch e depends only on (seed, e), so the sampler position
/// (epoch, cursor) is its complete state.
class BatchSampler {
 public:
  BatchSampler(std::vector<size_t> indices, std::uint64_t seed);

  std::vector<size_t> next(size_t batch_size);

  std::uint64_t epoch() const { return epoch_; }
  std::uint64_t cursor() const { return cursor_; }
  void set_position(std::uint64_t epoch, std::uint64_t cursor);

 private:
  void reshuffle();

  std::vector<size_t> base_;
  std::vector<size_t> order_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::uint64_t cursor_ = 0;
};

/// Seeded Fisher-Yates permutation of 0..n-1. Portable, unlike std::shuffle.
std::vector<int64_t> seeded_permutation(int64_t n, std::uint64_t seed);

/// Exemplar assignment: B[perm[k]] = A[perm[k+1 mod n]] for a seeded
/// shuffle perm, which is a permutation with no fixed point.
std::vector<int64_t> derangement(int64_t n, std::uint64_t seed);

/// Forms (A, B) training pairs: B holds A's rows (images with their labels)
/// under a seeded derangement.
std::pair<LabeledBatch, LabeledBatch> make_pairs(const LabeledBatch& batch, std::uint64_t seed);

}  // namespace mulgan
