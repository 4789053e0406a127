#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace ginc {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// 64-bit FNV-1a of a stream tag.
std::uint64_t hash_tag(std::string_view tag) noexcept;

// Derives the seed of a named sub-stream. Every random quantity in the project
// is drawn from its own stream, keyed by a tag ("property", "doc/train", ...)
// and a list of integer indices (concept id, document index, ...):
//
//   s0 = splitmix64(master ^ fnv1a(tag))
//   s_{i+1} = splitmix64(s_i ^ splitmix64(index_i + 0x9e3779b97f4a7c15))
//
// Results therefore never depend on generation order or thread count.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::initializer_list<std::uint64_t> indices = {}) noexcept;

// Deterministic random source. The engine is std::mt19937_64 (fully specified
// by the standard); the conversions to doubles and bounded integers are done
// here rather than through <random> distributions, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform on {0, ..., n-1}; n must be positive.
  std::size_t uniform_index(std::size_t n);

  // Draws an index with probability proportional to `weights` (non-negative,
  // positive total).
  std::size_t categorical(std::span<const double> weights);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ginc
