#include "sprites.hpp"

#include <algorithm>

#include "errors.hpp"
#include "seeding.hpp"

namespace mulgan {
namespace {

constexpr int kGrid = 32;

enum class Attr { Glasses, Smile, Bangs };

Attr attr_kind(const std::string& name) {
  if (name == "glasses") return Attr::Glasses;
  if (name == "smile") return Attr::Smile;
  if (name == "bangs") return Attr::Bangs;
  throw ConfigError("unknown sprite attribute '" + name + "' (valid: glasses, smile, bangs)");
}

struct Placement {
  int cx, cy;
  size_t background, skin;
};

Placement place(const SpriteSpec& spec, std::uint64_t seed) {
  std::uint64_t s = splitmix64(seed);
  const int span = 2 * spec.jitter + 1;
  Placement p{};
  p.cx = kGrid / 2 + static_cast<int>(s % static_cast<std::uint64_t>(span)) - spec.jitter;
  s = splitmix64(s);
  p.cy = kGrid / 2 + static_cast<int>(s % static_cast<std::uint64_t>(span)) - spec.jitter;
  s = splitmix64(s);
  p.background = static_cast<size_t>(s % spec.backgrounds.size());
  s = splitmix64(s);
  p.skin = static_cast<size_t>(s % spec.skins.size());
  return p;
}

struct Rect {
  int x0, y0, x1, y1;  // inclusive
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

Rect region(Attr a, const Placement& p) {
  switch (a) {
    case Attr::Glasses: return {p.cx - 7, p.cy - 4, p.cx + 6, p.cy - 1};
    case Attr::Smile: return {p.cx - 5, p.cy + 3, p.cx + 5, p.cy + 7};
    case Attr::Bangs: return {p.cx - 9, p.cy - 11, p.cx + 9, p.cy - 7};
  }
  return {0, 0, -1, -1};
}

using Canvas = std::array<std::array<Rgb, kGrid>, kGrid>;  // [y][x]

void put(Canvas& c, int x, int y, Rgb col) {
  if (x >= 0 && x < kGrid && y >= 0 && y < kGrid) c[static_cast<size_t>(y)][static_cast<size_t>(x)] = col;
}

Canvas paint(const SpriteSpec& spec, const std::vector<bool>& on, const Placement& p) {
  Canvas c;
  const Rgb bg = spec.backgrounds[p.background];
  const Rgb skin = spec.skins[p.skin];
  for (auto& row : c) row.fill(bg);

  for (int y = 0; y < kGrid; ++y)
    for (int x = 0; x < kGrid; ++x) {
      const int dx = x - p.cx, dy = y - (p.cy + 1);
      if (dx * dx * 144 + dy * dy * 100 <= 14400) put(c, x, y, skin);
    }
  for (int y = p.cy - 3; y <= p.cy - 2; ++y) {
    put(c, p.cx - 5, y, spec.feature);
    put(c, p.cx - 4, y, spec.feature);
    put(c, p.cx + 3, y, spec.feature);
    put(c, p.cx + 4, y, spec.feature);
  }
  for (int x = p.cx - 4; x <= p.cx + 4; ++x) put(c, x, p.cy + 6, spec.feature);

  for (size_t i = 0; i < spec.attributes.size(); ++i) {
    if (!on[i]) continue;
    const Attr a = attr_kind(spec.attributes[i]);
    const Rect r = region(a, p);
    switch (a) {
      case Attr::Glasses:
        for (int y = r.y0; y <= r.y1; ++y) {
          for (int x = p.cx - 7; x <= p.cx - 2; ++x) put(c, x, y, spec.glasses);
          for (int x = p.cx + 1; x <= p.cx + 6; ++x) put(c, x, y, spec.glasses);
        }
        put(c, p.cx - 1, p.cy - 3, spec.glasses);
        put(c, p.cx, p.cy - 3, spec.glasses);
        break;
      case Attr::Smile:
        for (int y = r.y0; y <= r.y1; ++y)
          for (int x = r.x0; x <= r.x1; ++x) put(c, x, y, skin);
        // open grin: a filled bowl narrowing downwards
        for (int row = 0; row < 4; ++row)
          for (int x = p.cx - 5 + row; x <= p.cx + 5 - row; ++x) put(c, x, p.cy + 3 + row, spec.feature);
        break;
      case Attr::Bangs:
        for (int y = r.y0; y <= r.y1; ++y)
          for (int x = r.x0; x <= r.x1; ++x) put(c, x, y, spec.hair);
        break;
    }
  }
  return c;
}

int grid_coord(int pixel, int size) { return pixel * kGrid / size; }

}  // namespace

void validate(const SpriteSpec& spec) {
  if (spec.image_size < 8) throw ConfigError("sprite image_size must be at least 8");
  if (spec.attributes.empty()) throw ConfigError("sprite spec needs at least one attribute");
  if (spec.backgrounds.empty() || spec.skins.empty()) throw ConfigError("sprite palette is empty");
  if (spec.jitter < 0 || spec.jitter > 3) throw ConfigError("sprite jitter must be in [0,3]");
  std::vector<Attr> seen;
  for (const auto& n : spec.attributes) {
    Attr a = attr_kind(n);
    if (std::find(seen.begin(), seen.end(), a) != seen.end())
      throw ConfigError("duplicate sprite attribute '" + n + "'");
    seen.push_back(a);
  }
}

torch::Tensor generate_sprite(const SpriteSpec& spec, const AttributeVector& labels, std::uint64_t seed) {
  if (labels.size() != spec.attributes.size())
    throw ConfigError("sprite label vector has " + std::to_string(labels.size()) + " entries but the sprite set has " +
                      std::to_string(spec.attributes.size()) + " attributes");
  check_binary(labels, "sprite labels");
  std::vector<bool> on(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) on[i] = labels[i] == 1;

  const Placement p = place(spec, seed);
  const Canvas c = paint(spec, on, p);
  const int s = spec.image_size;
  auto img = torch::empty({3, s, s});
  auto acc = img.accessor<float, 3>();
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      const Rgb px = c[static_cast<size_t>(grid_coord(y, s))][static_cast<size_t>(grid_coord(x, s))];
      acc[0][y][x] = static_cast<float>(px.r) / 127.5f - 1.0f;
      acc[1][y][x] = static_cast<float>(px.g) / 127.5f - 1.0f;
      acc[2][y][x] = static_cast<float>(px.b) / 127.5f - 1.0f;
    }
  return img;
}

torch::Tensor sprite_region_mask(const SpriteSpec& spec, int attr, std::uint64_t seed) {
  if (attr < 0 || static_cast<size_t>(attr) >= spec.attributes.size())
    throw ValidationError("attribute index out of range");
  const Rect r = region(attr_kind(spec.attributes[static_cast<size_t>(attr)]), place(spec, seed));
  const int s = spec.image_size;
  auto mask = torch::zeros({s, s}, torch::kBool);
  auto acc = mask.accessor<bool, 2>();
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) acc[y][x] = r.contains(grid_coord(x, s), grid_coord(y, s));
  return mask;
}

SpriteSource::SpriteSource(SpriteSpec spec, std::uint64_t seed, size_t n_train, size_t n_val, size_t n_test)
    : spec_(std::move(spec)), seed_(seed) {
  validate(spec_);
  split_.n_attrs = static_cast<int>(spec_.attributes.size());
  split_.attribute_names = spec_.attributes;
  size_t i = 0;
  for (; i < n_train; ++i) split_.train.push_back(i);
  for (; i < n_train + n_val; ++i) split_.val.push_back(i);
  for (; i < n_train + n_val + n_test; ++i) split_.test.push_back(i);
}

std::uint64_t SpriteSource::sprite_seed(size_t index) const {
  return derive_seed(seed_, "sprite", {index});
}

AttributeVector SpriteSource::labels_of(size_t index) const {
  std::uint64_t s = derive_seed(seed_, "sprite-labels", {index});
  AttributeVector v(spec_.attributes.size());
  for (auto& b : v) {
    s = splitmix64(s);
    b = static_cast<int>(s >> 63);
  }
  return v;
}

LabeledBatch SpriteSource::load(std::span<const size_t> indices) const {
  const auto n = static_cast<int64_t>(indices.size());
  LabeledBatch b{torch::empty({n, 3, spec_.image_size, spec_.image_size}),
                 torch::empty({n, static_cast<int64_t>(spec_.attributes.size())})};
  for (int64_t k = 0; k < n; ++k) {
    const size_t idx = indices[static_cast<size_t>(k)];
    const auto labels = labels_of(idx);
    b.images[k].copy_(generate_sprite(spec_, labels, sprite_seed(idx)));
    b.labels[k].copy_(to_label_tensor(labels)[0]);
  }
  return b;
}

}  // namespace mulgan
