#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ginc/hmm.hpp"
#include "ginc/rng.hpp"

namespace ginc {

// Parameters of the synthetic pretraining distribution. Defaults reproduce
// the standard 50-token, 5-concept dataset.
struct GincConfig {
  std::size_t vocab_size = 50;
  std::size_t n_entities = 10;
  std::size_t n_properties = 10;
  std::size_t n_concepts = 5;
  std::size_t perm_count = 100;
  double concept_temperature = 0.1;
  double start_temperature = 10.0;
  double entity_self_loop = 0.9;
  std::size_t n_train_docs = 1000;
  std::size_t n_val_docs = 100;
  std::size_t train_doc_len = 10240;
  std::size_t val_doc_len = 1024;
  std::uint64_t master_seed = 42;

  // Throws InvalidConfiguration.
  void validate() const;

  bool operator==(const GincConfig&) const = default;
};

// Attempts allowed when redrawing permutation sets to obtain a strictly
// positive matrix.
inline constexpr int kMaxPositivityAttempts = 100;

// softmax((u - 0.5) / temperature) with u uniform on [0,1)^count.
std::vector<double> tempered_softmax_weights(Rng& rng, std::size_t count, double temperature);

// Uniformly random permutation of {0..size-1} (Fisher-Yates).
std::vector<std::size_t> random_permutation(Rng& rng, std::size_t size);

// sum_k weights[k] * P_k for `weights.size()` independent uniformly random
// permutation matrices P_k. No positivity check.
Matrix mix_permutations(Rng& rng, std::size_t size, std::span<const double> weights);

// Convex combination of `perm_count` random permutation matrices with tempered
// softmax weights. The permutation set is redrawn until every entry is
// strictly positive; ConstructionError after kMaxPositivityAttempts.
Matrix build_property_matrix(Rng& rng, std::size_t size = 10, std::size_t perm_count = 100,
                             double temperature = 0.1);

// (1 - self_loop) * T + self_loop * I, T built like a property matrix.
Matrix build_entity_matrix(Rng& rng, std::size_t size = 10, std::size_t perm_count = 100,
                           double temperature = 0.1, double self_loop = 0.9);

std::vector<double> build_start_distribution(Rng& rng, std::size_t n_states = 100,
                                             double temperature = 10.0);

// Column 0 is the delimiter; every other cell is uniform over the
// non-delimiter tokens.
MemoryMatrix build_memory_matrix(Rng& rng, const Vocabulary& vocab, std::size_t n_entities = 10,
                                 std::size_t n_properties = 10);

// Sub-stream tags used by build_mixture, with index lists:
//   "entity"        shared entity matrix
//   "memory"        shared memory matrix
//   "property" {c}  property matrix of concept c
//   "start" {c}     start distribution of concept c
HmmMixture build_mixture(const GincConfig& config);

// `count` additional concepts drawn exactly like the mixture's own, from the
// streams "<family>/property" {c} and "<family>/start" {c}.
std::vector<ConceptParams> build_fresh_concepts(const GincConfig& config, const std::string& family,
                                                std::size_t count);

struct Document {
  std::size_t concept_id = 0;
  std::vector<TokenId> tokens;

  bool operator==(const Document&) const = default;
};

// Draws a concept from the prior, h_1 from its start distribution, then runs
// the entity and property chains for `length` steps.
Document sample_document(const HmmMixture& mixture, Rng& rng, std::size_t length);

// Document i uses the stream derive_seed(master_seed, "doc/" + split, {i}).
std::vector<Document> sample_documents(const HmmMixture& mixture, std::uint64_t master_seed,
                                       const std::string& split, std::size_t count,
                                       std::size_t length, std::size_t threads = 1);

// Row-stochasticity, strict positivity, self-loop and start-ratio checks
// used by tests and the corpus manifest. Returns an empty string when every
// check passes, otherwise a description of the first failure.
std::string check_construction_invariants(const HmmMixture& mixture, const GincConfig& config);

}  // namespace ginc
