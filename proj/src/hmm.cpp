#include "ginc/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ginc/errors.hpp"

namespace ginc {

namespace {

Matrix log_of(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = std::log(m(r, c));
  }
  return out;
}

}  // namespace

MemoryMatrix::MemoryMatrix(std::size_t n_entities, std::size_t n_properties,
                           std::vector<TokenId> entries, std::size_t vocab_size)
    : n_entities_(n_entities),
      n_properties_(n_properties),
      vocab_size_(vocab_size),
      entries_(std::move(entries)) {
  if (n_entities_ == 0 || n_properties_ == 0) {
    throw InvalidConfiguration("memory matrix needs at least one entity and one property");
  }
  if (entries_.size() != n_entities_ * n_properties_) {
    throw InvalidConfiguration("memory matrix entry count does not match its shape");
  }
  entity_of_.resize(entries_.size());
  property_of_.resize(entries_.size());
  emitters_.assign(vocab_size_, {});
  for (std::size_t h = 0; h < entries_.size(); ++h) {
    const TokenId token = entries_[h];
    if (token >= vocab_size_) {
      throw InvalidConfiguration("memory matrix entry outside the vocabulary");
    }
    entity_of_[h] = h / n_properties_;
    property_of_[h] = h % n_properties_;
    if ((property_of_[h] == 0) != (token == kDelimiterIndex)) {
      throw InvalidConfiguration(
          "memory matrix must hold the delimiter in column 0 and nowhere else");
    }
    emitters_[token].push_back(h);
  }
}

TokenId MemoryMatrix::at(HiddenState h) const {
  if (h.entity >= n_entities_ || h.property >= n_properties_) {
    throw OutOfRange("hidden state outside the memory matrix");
  }
  return entries_[state_index(h)];
}

TokenId hidden_to_token(const MemoryMatrix& memory, HiddenState h) { return memory.at(h); }

Hmm::Hmm(std::shared_ptr<const MemoryMatrix> memory, std::shared_ptr<const EntityMatrix> entity,
         ConceptParams params, Regularity regularity)
    : memory_(std::move(memory)), entity_(std::move(entity)), params_(std::move(params)) {
  const bool strict = regularity == Regularity::strict;
  require_row_stochastic(entity_->entity_transition, "entity transition", strict);
  require_row_stochastic(params_.property_transition, "property transition", strict);
  require_distribution(params_.start_distribution, "start distribution", strict);
  if (entity_->entity_transition.rows() != memory_->n_entities() ||
      params_.property_transition.rows() != memory_->n_properties() ||
      params_.start_distribution.size() != memory_->n_states()) {
    throw InvalidConfiguration("concept dimensions do not match the memory matrix");
  }
  log_entity_ = log_of(entity_->entity_transition);
  log_property_ = log_of(params_.property_transition);
  log_start_.resize(params_.start_distribution.size());
  for (std::size_t h = 0; h < log_start_.size(); ++h) {
    log_start_[h] = std::log(params_.start_distribution[h]);
  }
}

std::vector<double> uniform_prior(std::size_t n_concepts) {
  return std::vector<double>(n_concepts, 1.0 / static_cast<double>(n_concepts));
}

HmmMixture::HmmMixture(Vocabulary vocabulary, MemoryMatrix memory, EntityMatrix entity,
                       std::vector<ConceptParams> concepts, std::vector<double> prior,
                       Regularity regularity)
    : vocabulary_(std::move(vocabulary)),
      memory_(std::make_shared<const MemoryMatrix>(std::move(memory))),
      entity_(std::make_shared<const EntityMatrix>(std::move(entity))),
      prior_(std::move(prior)),
      regularity_(regularity) {
  if (concepts.empty()) throw InvalidConfiguration("mixture needs at least one concept");
  if (memory_->vocab_size() != vocabulary_.size()) {
    throw InvalidConfiguration("memory matrix and vocabulary disagree on size");
  }
  if (prior_.size() != concepts.size()) {
    throw InvalidConfiguration("prior length must equal the number of concepts");
  }
  require_distribution(prior_, "concept prior", true);
  hmms_.reserve(concepts.size());
  for (auto& c : concepts) hmms_.emplace_back(memory_, entity_, std::move(c), regularity_);
}

HmmMixture HmmMixture::with_concepts(std::vector<ConceptParams> concepts) const {
  const std::size_t count = concepts.size();
  return HmmMixture(vocabulary_, *memory_, *entity_, std::move(concepts), uniform_prior(count),
                    regularity_);
}

HmmMixture HmmMixture::subset(std::span<const std::size_t> ids) const {
  std::vector<ConceptParams> kept;
  kept.reserve(ids.size());
  for (std::size_t id : ids) kept.push_back(concept_params(id));
  return with_concepts(std::move(kept));
}

bool HmmMixture::operator==(const HmmMixture& other) const {
  if (!(vocabulary_ == other.vocabulary_) || !(*memory_ == *other.memory_) ||
      !(*entity_ == *other.entity_) || prior_ != other.prior_ ||
      hmms_.size() != other.hmms_.size()) {
    return false;
  }
  for (std::size_t c = 0; c < hmms_.size(); ++c) {
    if (!(hmms_[c].params() == other.hmms_[c].params())) return false;
  }
  return true;
}

double joint_transition_log(const HmmMixture& mixture, std::size_t concept_id, HiddenState from,
                            HiddenState to) {
  const Hmm& hmm = mixture.concept_hmm(concept_id);
  const MemoryMatrix& memory = mixture.memory();
  if (from.entity >= memory.n_entities() || to.entity >= memory.n_entities() ||
      from.property >= memory.n_properties() || to.property >= memory.n_properties()) {
    throw OutOfRange("hidden state outside the model");
  }
  return hmm.log_entity(from.entity, to.entity) + hmm.log_property(from.property, to.property);
}

ForwardState forward_init(const Hmm& hmm, InitOverride init) {
  ForwardState state;
  if (init.empty()) {
    state.log_alpha.resize(hmm.n_states());
    for (std::size_t h = 0; h < hmm.n_states(); ++h) state.log_alpha[h] = hmm.log_start(h);
  } else {
    if (init.size() != hmm.n_states()) {
      throw InvalidDistribution("initial distribution has the wrong number of states");
    }
    require_distribution(init, "initial distribution", false);
    state.log_alpha.resize(init.size());
    for (std::size_t h = 0; h < init.size(); ++h) state.log_alpha[h] = std::log(init[h]);
  }
  return state;
}

void advance(ForwardState& state, const Hmm& hmm, TokenId token) {
  const MemoryMatrix& memory = hmm.memory();
  if (token >= memory.vocab_size()) throw InvalidToken("token outside the vocabulary");

  const std::vector<std::size_t>& targets = memory.emitters(token);
  std::vector<double>& alpha = state.log_alpha;

  if (state.steps == 0) {
    // h_1 is drawn from the start distribution; only the emission applies.
    std::size_t next_target = 0;
    for (std::size_t h = 0; h < alpha.size(); ++h) {
      if (next_target < targets.size() && targets[next_target] == h) {
        ++next_target;
      } else {
        alpha[h] = kNegInf;
      }
    }
  } else {
    // new[h'] = logsumexp_h(alpha[h] + log T[h, h']) for the states h' that
    // emit the token; the rest are -inf. Only finite alpha entries contribute.
    thread_local std::vector<std::size_t> active;
    thread_local std::vector<double> next;
    active.clear();
    for (std::size_t h = 0; h < alpha.size(); ++h) {
      if (alpha[h] != kNegInf) active.push_back(h);
    }
    next.assign(alpha.size(), kNegInf);
    for (std::size_t target : targets) {
      const std::size_t to_entity = memory.entity_of(target);
      const std::size_t to_property = memory.property_of(target);
      double hi = kNegInf;
      for (std::size_t h : active) {
        const double term = alpha[h] + hmm.log_entity(memory.entity_of(h), to_entity) +
                            hmm.log_property(memory.property_of(h), to_property);
        hi = std::max(hi, term);
      }
      if (hi == kNegInf) continue;
      double sum = 0.0;
      for (std::size_t h : active) {
        const double term = alpha[h] + hmm.log_entity(memory.entity_of(h), to_entity) +
                            hmm.log_property(memory.property_of(h), to_property);
        sum += std::exp(term - hi);
      }
      next[target] = hi + std::log(sum);
    }
    alpha.swap(next);
  }
  state.log_likelihood_so_far = log_sum_exp(alpha);
  ++state.steps;
}

ForwardState forward_step(ForwardState state, const Hmm& hmm, TokenId token) {
  advance(state, hmm, token);
  return state;
}

ForwardState run_forward(std::span<const TokenId> tokens, const Hmm& hmm, InitOverride init) {
  ForwardState state = forward_init(hmm, init);
  for (TokenId token : tokens) advance(state, hmm, token);
  return state;
}

double sequence_log_likelihood(std::span<const TokenId> tokens, const Hmm& hmm,
                               InitOverride init) {
  return run_forward(tokens, hmm, init).log_likelihood_so_far;
}

std::vector<double> next_token_distribution(const ForwardState& state, const Hmm& hmm) {
  const MemoryMatrix& memory = hmm.memory();
  std::vector<double> out(memory.vocab_size(), 0.0);
  const double norm = state.log_likelihood_so_far;
  if (!std::isfinite(norm)) {
    throw UndefinedPosterior("next-token posterior after a zero-probability prefix");
  }
  const std::vector<double>& alpha = state.log_alpha;

  if (state.steps == 0) {
    for (std::size_t h = 0; h < alpha.size(); ++h) {
      out[memory.at_state(h)] += std::exp(alpha[h]);
    }
    return out;
  }

  std::vector<std::size_t> active;
  for (std::size_t h = 0; h < alpha.size(); ++h) {
    if (alpha[h] != kNegInf) active.push_back(h);
  }
  // Predictive mass of each next hidden state, then pushed through the
  // deterministic emission.
  for (std::size_t target = 0; target < alpha.size(); ++target) {
    const std::size_t to_entity = memory.entity_of(target);
    const std::size_t to_property = memory.property_of(target);
    double hi = kNegInf;
    for (std::size_t h : active) {
      hi = std::max(hi, alpha[h] + hmm.log_entity(memory.entity_of(h), to_entity) +
                            hmm.log_property(memory.property_of(h), to_property));
    }
    if (hi == kNegInf) continue;
    double sum = 0.0;
    for (std::size_t h : active) {
      sum += std::exp(alpha[h] + hmm.log_entity(memory.entity_of(h), to_entity) +
                      hmm.log_property(memory.property_of(h), to_property) - hi);
    }
    out[memory.at_state(target)] += std::exp(hi + std::log(sum) - norm);
  }
  return out;
}

std::vector<double> next_token_posterior(std::span<const TokenId> tokens, const Hmm& hmm,
                                         InitOverride init) {
  return next_token_distribution(run_forward(tokens, hmm, init), hmm);
}

}  // namespace ginc
