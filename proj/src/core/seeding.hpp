#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace mulgan {

// 64-bit FNV-1a. Stable across platforms and compilers, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Sub-seed for a named component of a run. Every random stream in the
/// project is derived from the single run seed through this function.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view component) {
  return splitmix64(seed ^ splitmix64(fnv1a(component)));
}

/// Sub-seed keyed additionally by counters (step, iteration, sample index...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view component,
                                    std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = derive_seed(seed, component);
  for (auto c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace mulgan
