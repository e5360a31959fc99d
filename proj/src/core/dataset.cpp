#include "dataset.hpp"

#include <numeric>

#include "errors.hpp"
#include "seeding.hpp"

namespace mulgan {

void check_binary(const AttributeVector& v, const char* what, long expected_len) {
  if (expected_len >= 0 && static_cast<long>(v.size()) != expected_len)
    throw ValidationError(std::string(what) + ": expected " + std::to_string(expected_len) +
                          " entries, got " + std::to_string(v.size()));
  for (size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0 && v[i] != 1)
      throw ValidationError(std::string(what) + ": entry " + std::to_string(i) + " is " +
                            std::to_string(v[i]) + ", expected 0 or 1");
}

torch::Tensor to_label_tensor(const AttributeVector& v) {
  auto t = torch::empty({1, static_cast<int64_t>(v.size())});
  for (size_t i = 0; i < v.size(); ++i) t[0][static_cast<int64_t>(i)] = static_cast<float>(v[i]);
  return t;
}

AttributeVector from_label_tensor(const torch::Tensor& row) {
  auto r = row.reshape({-1}).to(torch::kFloat32).contiguous();
  AttributeVector v(static_cast<size_t>(r.numel()));
  auto acc = r.accessor<float, 1>();
  for (int64_t i = 0; i < r.numel(); ++i) v[static_cast<size_t>(i)] = acc[i] > 0.5f ? 1 : 0;
  return v;
}

LabeledBatch LabeledBatch::index_select(const std::vector<int64_t>& rows) const {
  auto idx = torch::tensor(rows, torch::kInt64);
  return {images.index_select(0, idx), labels.index_select(0, idx)};
}

void check_batch(const LabeledBatch& b) {
  if (!b.images.defined() || b.images.dim() != 4 || b.images.size(1) != 3)
    throw ShapeError("batch images must be (N,3,H,W)");
  if (!b.labels.defined() || b.labels.dim() != 2 || b.labels.size(0) != b.images.size(0))
    throw ShapeError("batch labels must be (N,n_attrs) with N matching the images");
}

BatchSampler::BatchSampler(std::vector<size_t> indices, std::uint64_t seed)
    : base_(std::move(indices)), seed_(seed) {
  reshuffle();
}

void BatchSampler::reshuffle() {
  auto perm = seeded_permutation(static_cast<int64_t>(base_.size()),
                                 derive_seed(seed_, "sampler-epoch", {epoch_}));
  order_.resize(base_.size());
  for (size_t i = 0; i < base_.size(); ++i) order_[i] = base_[static_cast<size_t>(perm[i])];
}

std::vector<size_t> BatchSampler::next(size_t batch_size) {
  if (batch_size == 0 || batch_size > base_.size())
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds the " +
                      std::to_string(base_.size()) + " available training images");
  if (cursor_ + batch_size > order_.size()) {
    ++epoch_;
    cursor_ = 0;
    reshuffle();
  }
  std::vector<size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                          order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_size));
  cursor_ += batch_size;
  return out;
}

void BatchSampler::set_position(std::uint64_t epoch, std::uint64_t cursor) {
  epoch_ = epoch;
  cursor_ = cursor;
  reshuffle();
}

std::vector<int64_t> seeded_permutation(int64_t n, std::uint64_t seed) {
  std::vector<int64_t> p(static_cast<size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::uint64_t state = seed;
  for (int64_t i = n - 1; i > 0; --i) {
    state = splitmix64(state);
    // Multiply-shift bounded draw; bias is < 2^-32 for any realistic n.
    auto j = static_cast<int64_t>((static_cast<unsigned __int128>(state) *
                                   static_cast<std::uint64_t>(i + 1)) >> 64);
    std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
  }
  return p;
}

std::vector<int64_t> derangement(int64_t n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("cannot form exemplar pairs from a batch of size " + std::to_string(n));
  auto p = seeded_permutation(n, seed);
  std::vector<int64_t> src(static_cast<size_t>(n));
  for (int64_t k = 0; k < n; ++k)
    src[static_cast<size_t>(p[static_cast<size_t>(k)])] = p[static_cast<size_t>((k + 1) % n)];
  return src;
}

std::pair<LabeledBatch, LabeledBatch> make_pairs(const LabeledBatch& batch, std::uint64_t seed) {
  check_batch(batch);
  auto src = derangement(batch.size(), seed);
  return {batch, batch.index_select(src)};
}

}  // namespace mulgan
