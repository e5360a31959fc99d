#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include "errors.hpp"
#include "latent.hpp"
#include "support.hpp"

using namespace mulgan;

namespace {

// Channel-by-channel reference for mix(): which source supplies channel c
// and with which factor. Written without split() or torch::where.
torch::Tensor reference_mix(const torch::Tensor& src, const torch::Tensor& ex, const std::vector<int>& sy,
                            const std::vector<int>& ey, const std::vector<int>& mask, bool mix_mode) {
  const int64_t channels = src.size(1);
  const int n = static_cast<int>(sy.size());
  const int64_t block = channels / 2 / n;
  auto out = torch::zeros_like(src);
  for (int64_t c = 0; c < channels; ++c) {
    if (c >= channels / 2) {
      out.select(1, c).copy_(src.select(1, c));
      continue;
    }
    const auto i = static_cast<size_t>(c / block);
    if (mask[i])
      out.select(1, c).copy_(ex.select(1, c) * static_cast<float>(ey[i]));
    else if (mix_mode)
      out.select(1, c).copy_(src.select(1, c) * static_cast<float>(sy[i]));
  }
  return out;
}

std::vector<std::vector<int>> all_bits(int n) {
  std::vector<std::vector<int>> out;
  for (int b = 0; b < (1 << n); ++b) {
    std::vector<int> v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = (b >> i) & 1;
    out.push_back(v);
  }
  return out;
}

torch::Tensor as_tensor(const std::vector<int>& v) {
  auto t = torch::empty({static_cast<int64_t>(v.size())});
  for (size_t i = 0; i < v.size(); ++i) t[static_cast<int64_t>(i)] = static_cast<float>(v[i]);
  return t;
}

}  // namespace

TEST_CASE("split arithmetic") {
  auto z = torch::randn({2, 16, 3, 3});
  auto four = split(z, 4);
  REQUIRE(four.n_attrs() == 4);
  for (const auto& b : four.blocks) CHECK(b.size(1) == 2);
  CHECK(four.irrelevant.size(1) == 8);
  auto one = split(z, 1);
  CHECK(one.blocks[0].size(1) == 8);
  CHECK(one.irrelevant.size(1) == 8);
  CHECK_THROWS_AS(split(torch::randn({1, 10, 2, 2}), 4), ConfigError);
  CHECK_THROWS_AS(check_split_channels(10, 4), ConfigError);
  CHECK(testing::bit_equal(four.concat(), z));
  CHECK(testing::bit_equal(split(z[0], 2).concat(), z[0]));  // unbatched
}

TEST_CASE("filter on the worked example") {
  // two one-channel 1x2 blocks [[1,2]], [[3,4]] with an irrelevant half
  auto z = torch::tensor({1.f, 2.f, 3.f, 4.f, 5.f, 6.f, 7.f, 8.f}).reshape({4, 1, 2});
  auto f = filter(split(z, 2), AttributeVector{1, 0});
  CHECK(torch::equal(f.code.blocks[0], torch::tensor({1.f, 2.f}).reshape({1, 1, 2})));
  CHECK(torch::equal(f.code.blocks[1], torch::zeros({1, 1, 2})));
  CHECK(torch::equal(f.code.irrelevant, z.slice(0, 2, 4)));
}

TEST_CASE("label validation") {
  auto code = split(torch::randn({3, 8, 2, 2}), 2);
  CHECK_THROWS_AS(filter(code, torch::tensor({1.f, 0.5f})), ValidationError);
  CHECK_THROWS_AS(filter(code, torch::ones({3, 3})), ShapeError);
  CHECK_THROWS_AS(filter(code, AttributeVector{1, 2}), ValidationError);
  CHECK_NOTHROW(filter(code, torch::ones({3, 2})));
}

TEST_CASE("exhaustive latent invariants for up to four attributes") {
  torch::manual_seed(1234);
  for (int n = 1; n <= 4; ++n) {
    const int64_t channels = 2 * n * 3;
    for (int trial = 0; trial < 3; ++trial) {
      auto xa = torch::randn({2, channels, 2, 2});
      auto xb = torch::randn({2, channels, 2, 2});
      auto ca = split(xa, n), cb = split(xb, n);
      const auto vectors = all_bits(n);

      // identity
      auto ones = filter(ca, torch::ones({n}));
      CHECK(testing::bit_equal(ones.concat(), xa));

      for (const auto& y : vectors) {
        auto yt = as_tensor(y);
        auto fa = filter(ca, yt);
        // zeroed-block positions: block i is zero exactly when y_i = 0
        for (int i = 0; i < n; ++i) {
          const bool zero = fa.code.blocks[static_cast<size_t>(i)].abs().max().item<float>() == 0.f;
          CHECK(zero == (y[static_cast<size_t>(i)] == 0));
        }
        CHECK(testing::bit_equal(fa.code.irrelevant, ca.irrelevant));
        // idempotence
        CHECK(testing::bit_equal(filter(fa.code, yt).concat(), fa.concat()));

        for (const auto& yb : vectors) {
          auto fb = filter(cb, as_tensor(yb));
          auto [zc, zd] = swap(fa, fb);
          CHECK(testing::bit_equal(zc.code.irrelevant, ca.irrelevant));
          CHECK(testing::bit_equal(zd.code.irrelevant, cb.irrelevant));
          auto [back_a, back_b] = swap(zc, zd);  // swapping back restores both codes
          CHECK(testing::bit_equal(back_a.concat(), fa.concat()));
          CHECK(testing::bit_equal(back_b.concat(), fb.concat()));
          CHECK(torch::equal(zc.labels, fb.labels));

          for (const auto& m : vectors) {
            for (bool mix_mode : {false, true}) {
              auto got = mix(ca, as_tensor(y), cb, as_tensor(yb), as_tensor(m),
                             mix_mode ? MixMode::Mix : MixMode::Replace);
              CHECK(testing::bit_equal(got.concat(), reference_mix(xa, xb, y, yb, m, mix_mode)));
            }
          }
        }
        auto self = swap(fa, fa);
        CHECK(testing::bit_equal(self.first.concat(), fa.concat()));
        CHECK(testing::bit_equal(self.second.concat(), fa.concat()));
      }
    }
  }
}

TEST_CASE("mix reductions") {
  torch::manual_seed(5);
  auto ca = split(torch::randn({1, 12, 2, 2}), 3), cb = split(torch::randn({1, 12, 2, 2}), 3);
  auto sy = torch::tensor({1.f, 0.f, 1.f}), ey = torch::tensor({0.f, 1.f, 1.f});
  auto ones = torch::ones({3});

  auto all_replace = mix(ca, sy, cb, ones, ones, MixMode::Replace);
  CHECK(testing::bit_equal(all_replace.concat(), swap(filter(ca, sy), filter(cb, ones)).first.concat()));

  auto none = mix(ca, sy, cb, ey, torch::zeros({3}), MixMode::Mix);
  CHECK(testing::bit_equal(none.concat(), filter(ca, sy).concat()));

  auto two = split(torch::randn({1, 8, 1, 1}), 2), other = split(torch::randn({1, 8, 1, 1}), 2);
  auto one_block = mix(two, torch::ones({2}), other, torch::ones({2}), torch::tensor({1.f, 0.f}), MixMode::Mix);
  CHECK(testing::bit_equal(one_block.code.blocks[0], other.blocks[0]));
  CHECK(testing::bit_equal(one_block.code.blocks[1], two.blocks[1]));

  CHECK(parse_mix_mode("mix") == MixMode::Mix);
  CHECK(parse_mix_mode("replace") == MixMode::Replace);
  CHECK_THROWS_AS(parse_mix_mode("blend"), ConfigError);
}
