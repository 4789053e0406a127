#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ginc/hmm.hpp"
#include "ginc/rng.hpp"

namespace ginc {

// How ground-truth labels are computed.
//   test_only:   argmax p(y | x_test) under the prompt concept with the
//                prompt start distribution (the in-context task itself).
//   full_prompt: argmax p(y | whole prompt) under the prompt concept, the
//                first example started from the prompt start distribution.
enum class LabelMode { test_only, full_prompt };

std::string_view to_string(LabelMode mode);
LabelMode parse_label_mode(std::string_view text);

struct PromptConfig {
  std::size_t k = 10;  // tokens per training example; x_test has k-1
  std::size_t n = 0;   // training examples
  std::size_t n_prompts = 2500;
  LabelMode label_mode = LabelMode::test_only;
  std::uint64_t seed = 0;
  // When set, the test example length L is uniform on [2, k] and x_test holds
  // its first L-1 tokens.
  bool vary_test_length = false;

  void validate() const;
};

struct Prompt {
  std::size_t index = 0;
  std::uint64_t seed = 0;  // stream the prompt was drawn from
  std::size_t concept_id = 0;
  std::size_t start_property = 1;
  std::size_t k = 0;
  std::vector<std::vector<TokenId>> examples;
  std::vector<TokenId> x_test;
  TokenId y_test = 0;
  // [x_1, y_1, \, ..., x_n, y_n, \, x_test]
  std::vector<TokenId> flat_tokens;

  std::size_t n() const noexcept { return examples.size(); }
  bool operator==(const Prompt&) const = default;
};

// Uniform over entities with the property fixed to `start_property`.
// Property 0 is rejected because it would open every example with the
// delimiter.
std::vector<double> prompt_start_distribution(const MemoryMatrix& memory,
                                              std::size_t start_property);

// One prompt example of `length` tokens under `hmm`, started from the prompt
// start distribution. The property chain is conditioned on never entering
// the delimiter column within the example (exact finite-horizon
// conditioning via backward messages), so examples are delimiter-free.
std::vector<TokenId> sample_example(const Hmm& hmm, std::size_t start_property,
                                    std::size_t length, Rng& rng);

std::vector<TokenId> flatten_prompt(const std::vector<std::vector<TokenId>>& examples,
                                    std::span<const TokenId> x_test);

// Label for a conditioning sequence: argmax over non-delimiter tokens of
// next_token_posterior(tokens, hmm, prompt start), ties to the lowest index.
// Throws LabelError when the sequence has probability zero.
TokenId compute_label(std::span<const TokenId> conditioning, const Hmm& hmm,
                      std::size_t start_property);

TokenId compute_label(const Prompt& prompt, const Hmm& hmm, LabelMode mode);

// Draws start_property uniformly from [1, n_properties), then n training
// examples of length k and the test input, and labels the prompt.
Prompt sample_prompt(const HmmMixture& mixture, std::size_t concept_id, const PromptConfig& config,
                     Rng& rng);

// Stream of prompt i: derive_seed(config.seed, "prompt", {k, n, i}). The
// prompt concept is drawn from the mixture prior on that stream first.
Prompt sample_prompt_at(const HmmMixture& mixture, const PromptConfig& config, std::size_t index);

std::vector<Prompt> sample_prompts(const HmmMixture& mixture, const PromptConfig& config,
                                   std::size_t threads = 1);

}  // namespace ginc
