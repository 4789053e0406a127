#pragma once

// Shared fixtures for the unit tests: small random models and brute-force
// reference implementations that enumerate hidden paths with plain
// probabilities, independently of the library's log-space forward pass.

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "ginc/generator.hpp"
#include "ginc/hmm.hpp"
#include "ginc/rng.hpp"

namespace ginc::testing {

inline Matrix random_stochastic(Rng& rng, std::size_t n, bool allow_zeros = false) {
  Matrix m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      double w = 0.05 + rng.uniform();
      if (allow_zeros && rng.uniform() < 0.25) w = 0.0;
      m(r, c) = w;
      total += w;
    }
    if (total == 0.0) {
      m(r, r) = 1.0;
      total = 1.0;
    }
    for (std::size_t c = 0; c < n; ++c) m(r, c) /= total;
  }
  return m;
}

inline std::vector<double> random_distribution(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double total = 0.0;
  for (double& x : p) {
    x = 0.05 + rng.uniform();
    total += x;
  }
  for (double& x : p) x /= total;
  return p;
}

inline MemoryMatrix random_memory(Rng& rng, std::size_t n_entities, std::size_t n_properties,
                                  std::size_t vocab) {
  std::vector<TokenId> entries(n_entities * n_properties);
  for (std::size_t v = 0; v < n_entities; ++v) {
    for (std::size_t s = 0; s < n_properties; ++s) {
      entries[v * n_properties + s] =
          s == 0 ? kDelimiterIndex : static_cast<TokenId>(1 + rng.uniform_index(vocab - 1));
    }
  }
  return MemoryMatrix(n_entities, n_properties, std::move(entries), vocab);
}

// Random mixture with the given shape; strictly positive parameters.
inline HmmMixture random_mixture(std::uint64_t seed, std::size_t n_entities,
                                 std::size_t n_properties, std::size_t vocab,
                                 std::size_t n_concepts, bool allow_zeros = false) {
  Rng rng(seed);
  MemoryMatrix memory = random_memory(rng, n_entities, n_properties, vocab);
  EntityMatrix entity{random_stochastic(rng, n_entities, allow_zeros)};
  std::vector<ConceptParams> concepts;
  std::vector<double> prior = random_distribution(rng, n_concepts);
  for (std::size_t c = 0; c < n_concepts; ++c) {
    ConceptParams p;
    p.property_transition = random_stochastic(rng, n_properties, allow_zeros);
    p.start_distribution = random_distribution(rng, n_entities * n_properties);
    concepts.push_back(std::move(p));
  }
  return HmmMixture(Vocabulary::build(vocab), std::move(memory), std::move(entity),
                    std::move(concepts), std::move(prior),
                    allow_zeros ? Regularity::allow_zeros : Regularity::strict);
}

// p(tokens) by summing over every hidden path.
inline double brute_force_probability(const std::vector<TokenId>& tokens, const Hmm& hmm,
                                      const std::vector<double>& init = {}) {
  const MemoryMatrix& memory = hmm.memory();
  const std::size_t n_states = memory.n_states();
  const std::vector<double>& start = init.empty() ? hmm.start_distribution() : init;
  if (tokens.empty()) return 1.0;
  double total = 0.0;
  std::vector<std::size_t> path(tokens.size(), 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t t, double p) {
    if (t == tokens.size()) {
      total += p;
      return;
    }
    for (std::size_t h = 0; h < n_states; ++h) {
      if (memory.at_state(h) != tokens[t]) continue;
      double q;
      if (t == 0) {
        q = start[h];
      } else {
        const std::size_t g = path[t - 1];
        q = hmm.entity_transition()(memory.entity_of(g), memory.entity_of(h)) *
            hmm.property_transition()(memory.property_of(g), memory.property_of(h));
      }
      if (q == 0.0) continue;
      path[t] = h;
      rec(t + 1, p * q);
    }
  };
  rec(0, 1.0);
  return total;
}

inline std::vector<double> brute_force_next_token(const std::vector<TokenId>& prefix,
                                                  const Hmm& hmm,
                                                  const std::vector<double>& init = {}) {
  const std::size_t vocab = hmm.memory().vocab_size();
  const double base = brute_force_probability(prefix, hmm, init);
  std::vector<double> out(vocab);
  for (std::size_t o = 0; o < vocab; ++o) {
    auto ext = prefix;
    ext.push_back(static_cast<TokenId>(o));
    out[o] = brute_force_probability(ext, hmm, init) / base;
  }
  return out;
}

// Calls f on every token sequence of the given length.
inline void for_each_sequence(std::size_t vocab, std::size_t length,
                              const std::function<void(const std::vector<TokenId>&)>& f) {
  std::vector<TokenId> seq(length, 0);
  for (;;) {
    f(seq);
    std::size_t i = 0;
    while (i < length && ++seq[i] == vocab) seq[i++] = 0;
    if (i == length) return;
  }
}

}  // namespace ginc::testing
