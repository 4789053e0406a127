#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "ginc/matrix.hpp"
#include "ginc/vocabulary.hpp"

namespace ginc {

// Hidden state of the factorial HMM: an entity and a property. Joint states
// are numbered entity * n_properties + property.
struct HiddenState {
  std::size_t entity = 0;
  std::size_t property = 0;

  bool operator==(const HiddenState&) const = default;
};

// Deterministic emission table: hidden state (v, s) emits entries[v][s].
// Column 0 is the delimiter column, so property 0 is exactly the set of
// delimiter hidden states.
class MemoryMatrix {
 public:
  MemoryMatrix(std::size_t n_entities, std::size_t n_properties, std::vector<TokenId> entries,
               std::size_t vocab_size);

  std::size_t n_entities() const noexcept { return n_entities_; }
  std::size_t n_properties() const noexcept { return n_properties_; }
  std::size_t n_states() const noexcept { return entries_.size(); }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  const std::vector<TokenId>& entries() const noexcept { return entries_; }

  TokenId at(HiddenState h) const;
  TokenId at_state(std::size_t state) const { return entries_[state]; }

  std::size_t state_index(HiddenState h) const { return h.entity * n_properties_ + h.property; }
  HiddenState state(std::size_t index) const {
    return {index / n_properties_, index % n_properties_};
  }
  std::size_t entity_of(std::size_t state) const { return entity_of_[state]; }
  std::size_t property_of(std::size_t state) const { return property_of_[state]; }

  // Joint states emitting `token`, ascending.
  const std::vector<std::size_t>& emitters(TokenId token) const { return emitters_[token]; }

  bool operator==(const MemoryMatrix& other) const {
    return n_entities_ == other.n_entities_ && n_properties_ == other.n_properties_ &&
           vocab_size_ == other.vocab_size_ && entries_ == other.entries_;
  }

 private:
  std::size_t n_entities_;
  std::size_t n_properties_;
  std::size_t vocab_size_;
  std::vector<TokenId> entries_;
  std::vector<std::size_t> entity_of_;
  std::vector<std::size_t> property_of_;
  std::vector<std::vector<std::size_t>> emitters_;
};

TokenId hidden_to_token(const MemoryMatrix& memory, HiddenState h);

// Whether transition and start probabilities must be strictly positive.
// GINC mixtures are always strict; hand-built toy models may opt out to
// exercise zero-probability paths.
enum class Regularity { strict, allow_zeros };

// A concept: the property transition matrix plus the start distribution over
// all joint hidden states.
struct ConceptParams {
  Matrix property_transition;
  std::vector<double> start_distribution;

  bool operator==(const ConceptParams&) const = default;
};

// Entity transition matrix, shared by every concept of a mixture.
struct EntityMatrix {
  Matrix entity_transition;

  bool operator==(const EntityMatrix&) const = default;
};

// One fully specified HMM (shared memory and entity chain + one concept),
// with log tables precomputed for inference.
class Hmm {
 public:
  Hmm(std::shared_ptr<const MemoryMatrix> memory, std::shared_ptr<const EntityMatrix> entity,
      ConceptParams params, Regularity regularity = Regularity::strict);

  const MemoryMatrix& memory() const noexcept { return *memory_; }
  const Matrix& entity_transition() const noexcept { return entity_->entity_transition; }
  const Matrix& property_transition() const noexcept { return params_.property_transition; }
  const std::vector<double>& start_distribution() const noexcept { return params_.start_distribution; }
  const ConceptParams& params() const noexcept { return params_; }
  std::size_t n_states() const noexcept { return memory_->n_states(); }

  double log_start(std::size_t state) const { return log_start_[state]; }
  double log_entity(std::size_t from, std::size_t to) const { return log_entity_(from, to); }
  double log_property(std::size_t from, std::size_t to) const { return log_property_(from, to); }
  double log_transition(std::size_t from_state, std::size_t to_state) const {
    return log_entity_(memory_->entity_of(from_state), memory_->entity_of(to_state)) +
           log_property_(memory_->property_of(from_state), memory_->property_of(to_state));
  }

 private:
  std::shared_ptr<const MemoryMatrix> memory_;
  std::shared_ptr<const EntityMatrix> entity_;
  ConceptParams params_;
  Matrix log_entity_;
  Matrix log_property_;
  std::vector<double> log_start_;
};

// Mixture of HMMs over a concept family with a prior over concepts.
class HmmMixture {
 public:
  HmmMixture(Vocabulary vocabulary, MemoryMatrix memory, EntityMatrix entity,
             std::vector<ConceptParams> concepts, std::vector<double> prior,
             Regularity regularity = Regularity::strict);

  const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
  const MemoryMatrix& memory() const noexcept { return *memory_; }
  const EntityMatrix& entity() const noexcept { return *entity_; }
  std::size_t n_concepts() const noexcept { return hmms_.size(); }
  const Hmm& concept_hmm(std::size_t id) const { return hmms_.at(id); }
  const ConceptParams& concept_params(std::size_t id) const { return hmms_.at(id).params(); }
  const std::vector<double>& prior() const noexcept { return prior_; }
  Regularity regularity() const noexcept { return regularity_; }

  // Same vocabulary, memory and entity chain; new concept family with a
  // uniform prior.
  HmmMixture with_concepts(std::vector<ConceptParams> concepts) const;
  // Keeps only the listed concepts, uniform prior.
  HmmMixture subset(std::span<const std::size_t> ids) const;

  bool operator==(const HmmMixture& other) const;

 private:
  Vocabulary vocabulary_;
  std::shared_ptr<const MemoryMatrix> memory_;
  std::shared_ptr<const EntityMatrix> entity_;
  std::vector<Hmm> hmms_;
  std::vector<double> prior_;
  Regularity regularity_;
};

std::vector<double> uniform_prior(std::size_t n_concepts);

double joint_transition_log(const HmmMixture& mixture, std::size_t concept_id, HiddenState from,
                            HiddenState to);

// Filtering state: log_alpha[h] = log p(h_t = h, o_1..t | theta). Before the
// first token (steps == 0) it holds the log start distribution, which the
// first token conditions directly without a transition.
struct ForwardState {
  std::vector<double> log_alpha;
  double log_likelihood_so_far = 0.0;
  std::size_t steps = 0;
};

// An empty span selects the concept's own start distribution.
using InitOverride = std::span<const double>;

ForwardState forward_init(const Hmm& hmm, InitOverride init = {});

// Consumes one token in place. A token no reachable state emits leaves every
// entry at -inf; that is a legal zero-probability state.
void advance(ForwardState& state, const Hmm& hmm, TokenId token);

ForwardState forward_step(ForwardState state, const Hmm& hmm, TokenId token);

ForwardState run_forward(std::span<const TokenId> tokens, const Hmm& hmm, InitOverride init = {});

double sequence_log_likelihood(std::span<const TokenId> tokens, const Hmm& hmm,
                               InitOverride init = {});

// p(o_{t+1} = . | o_1..t) from a filtering state. Throws UndefinedPosterior
// when the state has probability zero.
std::vector<double> next_token_distribution(const ForwardState& state, const Hmm& hmm);

std::vector<double> next_token_posterior(std::span<const TokenId> tokens, const Hmm& hmm,
                                         InitOverride init = {});

}  // namespace ginc
