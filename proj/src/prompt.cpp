#include "ginc/prompt.hpp"

#include <cmath>
#include <fmt/format.h>

#include "ginc/errors.hpp"
#include "ginc/parallel.hpp"

namespace ginc {

std::string_view to_string(LabelMode mode) {
  return mode == LabelMode::test_only ? "test-only" : "full-prompt";
}

LabelMode parse_label_mode(std::string_view text) {
  if (text == "test-only") return LabelMode::test_only;
  if (text == "full-prompt") return LabelMode::full_prompt;
  throw InvalidConfiguration(fmt::format("unknown label mode '{}'", text));
}

void PromptConfig::validate() const {
  if (k < 2) throw InvalidConfiguration("example length k must be at least 2");
  if (n_prompts == 0) throw InvalidConfiguration("n_prompts must be positive");
}

std::vector<double> prompt_start_distribution(const MemoryMatrix& memory,
                                              std::size_t start_property) {
  if (start_property == 0 || start_property >= memory.n_properties()) {
    throw InvalidConfiguration(
        fmt::format("start property {} outside [1, {})", start_property, memory.n_properties()));
  }
  std::vector<double> p(memory.n_states(), 0.0);
  const double mass = 1.0 / static_cast<double>(memory.n_entities());
  for (std::size_t v = 0; v < memory.n_entities(); ++v) {
    p[memory.state_index({v, start_property})] = mass;
  }
  return p;
}

std::vector<TokenId> sample_example(const Hmm& hmm, std::size_t start_property,
                                    std::size_t length, Rng& rng) {
  const MemoryMatrix& memory = hmm.memory();
  const std::size_t n_props = memory.n_properties();
  if (start_property == 0 || start_property >= n_props) {
    throw InvalidConfiguration("start property must be a non-delimiter property");
  }
  const Matrix& prop = hmm.property_transition();

  // backward[t][s]: probability, up to scale, that steps t+1..length-1 avoid
  // property 0 given property s at step t.
  std::vector<std::vector<double>> backward(length, std::vector<double>(n_props, 0.0));
  if (length > 0) {
    for (std::size_t s = 1; s < n_props; ++s) backward[length - 1][s] = 1.0;
  }
  for (std::size_t t = length; t-- > 1;) {
    double scale = 0.0;
    for (std::size_t s = 1; s < n_props; ++s) {
      double acc = 0.0;
      for (std::size_t s2 = 1; s2 < n_props; ++s2) acc += prop(s, s2) * backward[t][s2];
      backward[t - 1][s] = acc;
      scale = std::max(scale, acc);
    }
    if (!(scale > 0.0)) break;
    for (double& b : backward[t - 1]) b /= scale;
  }
  if (length > 0 && !(backward[0][start_property] > 0.0)) {
    throw LabelError("no delimiter-free example exists from this start property");
  }

  std::vector<TokenId> tokens;
  tokens.reserve(length);
  std::size_t entity = rng.uniform_index(memory.n_entities());
  std::size_t property = start_property;
  std::vector<double> weights(n_props);
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      entity = rng.categorical(hmm.entity_transition().row(entity));
      for (std::size_t s2 = 0; s2 < n_props; ++s2) {
        weights[s2] = s2 == 0 ? 0.0 : prop(property, s2) * backward[t][s2];
      }
      property = rng.categorical(weights);
    }
    tokens.push_back(memory.at({entity, property}));
  }
  return tokens;
}

std::vector<TokenId> flatten_prompt(const std::vector<std::vector<TokenId>>& examples,
                                    std::span<const TokenId> x_test) {
  std::vector<TokenId> flat;
  for (const auto& ex : examples) {
    flat.insert(flat.end(), ex.begin(), ex.end());
    flat.push_back(kDelimiterIndex);
  }
  flat.insert(flat.end(), x_test.begin(), x_test.end());
  return flat;
}

TokenId compute_label(std::span<const TokenId> conditioning, const Hmm& hmm,
                      std::size_t start_property) {
  const auto init = prompt_start_distribution(hmm.memory(), start_property);
  const ForwardState state = run_forward(conditioning, hmm, init);
  if (!std::isfinite(state.log_likelihood_so_far)) {
    throw LabelError("conditioning sequence has probability zero under the prompt concept");
  }
  std::vector<double> posterior = next_token_distribution(state, hmm);
  posterior[kDelimiterIndex] = -1.0;
  return static_cast<TokenId>(argmax_lowest(posterior));
}

TokenId compute_label(const Prompt& prompt, const Hmm& hmm, LabelMode mode) {
  if (mode == LabelMode::test_only) return compute_label(prompt.x_test, hmm, prompt.start_property);
  return compute_label(prompt.flat_tokens, hmm, prompt.start_property);
}

Prompt sample_prompt(const HmmMixture& mixture, std::size_t concept_id, const PromptConfig& config,
                     Rng& rng) {
  config.validate();
  const Hmm& hmm = mixture.concept_hmm(concept_id);
  Prompt prompt;
  prompt.concept_id = concept_id;
  prompt.k = config.k;
  prompt.start_property = 1 + rng.uniform_index(mixture.memory().n_properties() - 1);
  prompt.examples.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    prompt.examples.push_back(sample_example(hmm, prompt.start_property, config.k, rng));
  }
  const std::size_t test_length =
      config.vary_test_length ? 2 + rng.uniform_index(config.k - 1) : config.k;
  prompt.x_test = sample_example(hmm, prompt.start_property, test_length - 1, rng);
  prompt.flat_tokens = flatten_prompt(prompt.examples, prompt.x_test);
  prompt.y_test = compute_label(prompt, hmm, config.label_mode);
  return prompt;
}

Prompt sample_prompt_at(const HmmMixture& mixture, const PromptConfig& config, std::size_t index) {
  const std::uint64_t seed = derive_seed(config.seed, "prompt", {config.k, config.n, index});
  Rng rng(seed);
  const std::size_t concept_id = rng.categorical(mixture.prior());
  Prompt prompt = sample_prompt(mixture, concept_id, config, rng);
  prompt.index = index;
  prompt.seed = seed;
  return prompt;
}

std::vector<Prompt> sample_prompts(const HmmMixture& mixture, const PromptConfig& config,
                                   std::size_t threads) {
  config.validate();
  std::vector<Prompt> prompts(config.n_prompts);
  parallel_for(config.n_prompts, threads,
               [&](std::size_t i) { prompts[i] = sample_prompt_at(mixture, config, i); });
  return prompts;
}

}  // namespace ginc
