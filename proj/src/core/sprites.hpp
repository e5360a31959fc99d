#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"

namespace mulgan {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Procedural face sprites with three attributes, each of which paints a
/// fixed region of the face: glasses (band over the eye row), smile (mouth
/// box, an open grin instead of a flat stroke) and bangs (hair band over the
/// forehead). Geometry is defined on a 32x32 grid and point-sampled to
/// `image_size`.
struct SpriteSpec {
  int image_size = 32;
  std::vector<std::string> attributes{"glasses", "smile", "bangs"};
  // Identity variation: the sprite seed picks one background and one skin.
  std::vector<Rgb> backgrounds{{200, 220, 240}, {230, 230, 195}, {205, 240, 205}, {240, 210, 225}};
  std::vector<Rgb> skins{{240, 200, 170}, {200, 150, 110}, {250, 225, 195}};
  Rgb feature{60, 30, 30};  // eyes and mouth
  Rgb glasses{20, 20, 70};
  Rgb hair{90, 55, 20};
  int jitter = 2;  // max face offset in grid pixels, per axis
};

void validate(const SpriteSpec& spec);

/// Pure function of (spec, labels, seed). Returns (3,S,S) float32 in [-1,1].
/// `labels` is indexed by position in spec.attributes; recognised names are
/// "glasses", "smile" and "bangs".
torch::Tensor generate_sprite(const SpriteSpec& spec, const AttributeVector& labels, std::uint64_t seed);

/// Pixels (S,S bool) that attribute `attr` may change for the given seed.
torch::Tensor sprite_region_mask(const SpriteSpec& spec, int attr, std::uint64_t seed);

/// Deterministic sprite collection: sprite i has seed derive(seed, i) and
/// independent fair-coin labels. Indices [0,n_train) are the training split,
/// followed by n_val validation and n_test test indices.
class SpriteSource final : public ImageSource {
 public:
  SpriteSource(SpriteSpec spec, std::uint64_t seed, size_t n_train, size_t n_val, size_t n_test);

  const DatasetSplit& split() const override { return split_; }
  int image_size() const override { return spec_.image_size; }
  LabeledBatch load(std::span<const size_t> indices) const override;
  AttributeVector labels_of(size_t index) const override;

  std::uint64_t sprite_seed(size_t index) const;
  const SpriteSpec& spec() const { return spec_; }

 private:
  SpriteSpec spec_;
  std::uint64_t seed_;
  DatasetSplit split_;
};

}  // namespace mulgan
