#include "ginc/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "ginc/errors.hpp"
#include "ginc/parallel.hpp"

namespace ginc {

void GincConfig::validate() const {
  if (vocab_size < 2) throw InvalidConfiguration("vocab_size must be at least 2");
  if (n_entities == 0 || n_properties < 2) {
    throw InvalidConfiguration("need at least one entity and two properties");
  }
  if (n_concepts == 0 || perm_count == 0) {
    throw InvalidConfiguration("n_concepts and perm_count must be positive");
  }
  if (!(concept_temperature > 0.0) || !(start_temperature > 0.0)) {
    throw InvalidConfiguration("temperatures must be positive");
  }
  if (!(entity_self_loop >= 0.0 && entity_self_loop < 1.0)) {
    throw InvalidConfiguration("entity_self_loop must lie in [0, 1)");
  }
  if (train_doc_len == 0 || val_doc_len == 0) {
    throw InvalidConfiguration("document lengths must be positive");
  }
}

std::vector<double> tempered_softmax_weights(Rng& rng, std::size_t count, double temperature) {
  if (count == 0) throw InvalidConfiguration("softmax over zero coordinates");
  if (!(temperature > 0.0)) throw InvalidConfiguration("temperature must be positive");
  std::vector<double> logits(count);
  for (double& l : logits) l = (rng.uniform() - 0.5) / temperature;
  const double hi = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - hi);
    total += l;
  }
  for (double& l : logits) l /= total;
  return logits;
}

std::vector<std::size_t> random_permutation(Rng& rng, std::size_t size) {
  std::vector<std::size_t> perm(size);
  for (std::size_t i = 0; i < size; ++i) perm[i] = i;
  for (std::size_t i = size; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  }
  return perm;
}

Matrix mix_permutations(Rng& rng, std::size_t size, std::span<const double> weights) {
  Matrix m(size, size);
  for (double w : weights) {
    const auto perm = random_permutation(rng, size);
    for (std::size_t i = 0; i < size; ++i) m(i, perm[i]) += w;
  }
  return m;
}

Matrix build_property_matrix(Rng& rng, std::size_t size, std::size_t perm_count,
                             double temperature) {
  if (size < 2) throw InvalidConfiguration("transition matrix size must be at least 2");
  if (perm_count == 0) throw InvalidConfiguration("perm_count must be positive");
  const auto weights = tempered_softmax_weights(rng, perm_count, temperature);
  for (int attempt = 0; attempt < kMaxPositivityAttempts; ++attempt) {
    Matrix m = mix_permutations(rng, size, weights);
    if (min_entry(m) > 0.0) return m;
  }
  throw ConstructionError(fmt::format(
      "no strictly positive permutation mixture after {} attempts", kMaxPositivityAttempts));
}

Matrix build_entity_matrix(Rng& rng, std::size_t size, std::size_t perm_count, double temperature,
                           double self_loop) {
  if (!(self_loop >= 0.0 && self_loop < 1.0)) {
    throw InvalidConfiguration("self_loop must lie in [0, 1)");
  }
  Matrix m = build_property_matrix(rng, size, perm_count, temperature);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      m(i, j) = (1.0 - self_loop) * m(i, j) + (i == j ? self_loop : 0.0);
    }
  }
  return m;
}

std::vector<double> build_start_distribution(Rng& rng, std::size_t n_states, double temperature) {
  if (n_states == 0) throw InvalidConfiguration("start distribution over zero states");
  return tempered_softmax_weights(rng, n_states, temperature);
}

MemoryMatrix build_memory_matrix(Rng& rng, const Vocabulary& vocab, std::size_t n_entities,
                                 std::size_t n_properties) {
  std::vector<TokenId> entries(n_entities * n_properties);
  for (std::size_t v = 0; v < n_entities; ++v) {
    for (std::size_t s = 0; s < n_properties; ++s) {
      entries[v * n_properties + s] =
          s == 0 ? kDelimiterIndex : static_cast<TokenId>(1 + rng.uniform_index(vocab.size() - 1));
    }
  }
  return MemoryMatrix(n_entities, n_properties, std::move(entries), vocab.size());
}

namespace {

ConceptParams build_concept(const GincConfig& config, const std::string& prefix, std::size_t c) {
  Rng property_rng(derive_seed(config.master_seed, prefix + "property", {c}));
  Rng start_rng(derive_seed(config.master_seed, prefix + "start", {c}));
  ConceptParams params;
  params.property_transition = build_property_matrix(property_rng, config.n_properties,
                                                     config.perm_count, config.concept_temperature);
  params.start_distribution = build_start_distribution(
      start_rng, config.n_entities * config.n_properties, config.start_temperature);
  return params;
}

}  // namespace

HmmMixture build_mixture(const GincConfig& config) {
  config.validate();
  Vocabulary vocab = Vocabulary::build(config.vocab_size);

  Rng entity_rng(derive_seed(config.master_seed, "entity"));
  EntityMatrix entity{build_entity_matrix(entity_rng, config.n_entities, config.perm_count,
                                          config.concept_temperature, config.entity_self_loop)};
  Rng memory_rng(derive_seed(config.master_seed, "memory"));
  MemoryMatrix memory =
      build_memory_matrix(memory_rng, vocab, config.n_entities, config.n_properties);

  std::vector<ConceptParams> concepts;
  concepts.reserve(config.n_concepts);
  for (std::size_t c = 0; c < config.n_concepts; ++c) {
    concepts.push_back(build_concept(config, "", c));
  }
  return HmmMixture(std::move(vocab), std::move(memory), std::move(entity), std::move(concepts),
                    uniform_prior(config.n_concepts), Regularity::strict);
}

std::vector<ConceptParams> build_fresh_concepts(const GincConfig& config, const std::string& family,
                                                std::size_t count) {
  config.validate();
  std::vector<ConceptParams> concepts;
  concepts.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    concepts.push_back(build_concept(config, family + "/", c));
  }
  return concepts;
}

Document sample_document(const HmmMixture& mixture, Rng& rng, std::size_t length) {
  if (length == 0) throw InvalidConfiguration("document length must be positive");
  Document doc;
  doc.concept_id = rng.categorical(mixture.prior());
  const Hmm& hmm = mixture.concept_hmm(doc.concept_id);
  const MemoryMatrix& memory = mixture.memory();

  HiddenState h = memory.state(rng.categorical(hmm.start_distribution()));
  doc.tokens.reserve(length);
  doc.tokens.push_back(memory.at(h));
  for (std::size_t t = 1; t < length; ++t) {
    h.entity = rng.categorical(hmm.entity_transition().row(h.entity));
    h.property = rng.categorical(hmm.property_transition().row(h.property));
    doc.tokens.push_back(memory.at(h));
  }
  return doc;
}

std::vector<Document> sample_documents(const HmmMixture& mixture, std::uint64_t master_seed,
                                       const std::string& split, std::size_t count,
                                       std::size_t length, std::size_t threads) {
  std::vector<Document> docs(count);
  const std::string tag = "doc/" + split;
  parallel_for(count, threads, [&](std::size_t i) {
    Rng rng(derive_seed(master_seed, tag, {i}));
    docs[i] = sample_document(mixture, rng, length);
  });
  return docs;
}

std::string check_construction_invariants(const HmmMixture& mixture, const GincConfig& config) {
  const Matrix& entity = mixture.entity().entity_transition;
  if (max_row_sum_error(entity) > kStochasticTol) return "entity matrix rows do not sum to 1";
  if (min_entry(entity) <= 0.0) return "entity matrix has a non-positive entry";
  for (std::size_t v = 0; v < entity.rows(); ++v) {
    if (entity(v, v) < config.entity_self_loop) {
      return fmt::format("entity self-loop {} below {}", entity(v, v), config.entity_self_loop);
    }
  }
  const MemoryMatrix& memory = mixture.memory();
  for (std::size_t v = 0; v < memory.n_entities(); ++v) {
    if (memory.at({v, 0}) != kDelimiterIndex) return "memory column 0 is not all delimiter";
    for (std::size_t s = 1; s < memory.n_properties(); ++s) {
      if (memory.at({v, s}) == kDelimiterIndex) return "delimiter outside memory column 0";
    }
  }
  const double max_start_ratio = std::exp(1.0 / config.start_temperature);
  for (std::size_t c = 0; c < mixture.n_concepts(); ++c) {
    const Hmm& hmm = mixture.concept_hmm(c);
    const Matrix& prop = hmm.property_transition();
    if (max_row_sum_error(prop) > kStochasticTol) {
      return fmt::format("concept {} property rows do not sum to 1", c);
    }
    // Entrywise positivity and row sums of the joint transition.
    const std::size_t n = memory.n_states();
    for (std::size_t from = 0; from < n; ++from) {
      double row = 0.0;
      for (std::size_t to = 0; to < n; ++to) {
        const double p = entity(memory.entity_of(from), memory.entity_of(to)) *
                         prop(memory.property_of(from), memory.property_of(to));
        if (!(p > 0.0)) return fmt::format("concept {} joint transition has a zero entry", c);
        row += p;
      }
      if (std::abs(row - 1.0) > kStochasticTol) {
        return fmt::format("concept {} joint transition row {} sums to {}", c, from, row);
      }
    }
    const auto& start = hmm.start_distribution();
    const auto [lo, hi] = std::minmax_element(start.begin(), start.end());
    if (!(*lo > 0.0)) return fmt::format("concept {} start distribution has a zero entry", c);
    if (*hi / *lo > max_start_ratio * (1.0 + 1e-12)) {
      return fmt::format("concept {} start max/min ratio {} exceeds {}", c, *hi / *lo,
                         max_start_ratio);
    }
  }
  return {};
}

}  // namespace ginc
