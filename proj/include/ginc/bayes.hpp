#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "ginc/hmm.hpp"
#include "ginc/prompt.hpp"

namespace ginc {

// Posterior over the concepts of a mixture given a token sequence.
struct ConceptPosterior {
  std::vector<double> log_weights;  // log prior + log likelihood, unnormalized
  std::vector<double> normalized;
};

// Per-concept forward pass over a prompt, shared by the predictor,
// posterior and likelihood-ratio computations.
struct PromptAnalysis {
  std::vector<double> log_likelihoods;                 // log p(tokens | concept c)
  std::vector<std::vector<double>> next_token;         // empty where likelihood is 0
  ConceptPosterior posterior;
  std::vector<double> predictive;                      // posterior predictive
};

// Concepts scored with their own start distributions. Throws
// UndefinedPosterior when every concept assigns the sequence probability 0.
PromptAnalysis analyse_prompt(std::span<const TokenId> tokens, const HmmMixture& mixture);

ConceptPosterior concept_posterior(std::span<const TokenId> tokens, const HmmMixture& mixture);

// Normalizes log weights over the concepts with finite weight.
ConceptPosterior normalize_log_weights(std::vector<double> log_weights);

std::vector<double> posterior_predictive(std::span<const TokenId> tokens,
                                         const HmmMixture& mixture);

// Tokens f_n may output. `labels` excludes the delimiter, which is never a
// prompt label; `vocabulary` takes the argmax over every token.
enum class OutputSpace { labels, vocabulary };

std::string_view to_string(OutputSpace space);
OutputSpace parse_output_space(std::string_view text);

// f_n: argmax of the posterior predictive over `space`, ties to the lowest
// token index.
TokenId in_context_predict(std::span<const TokenId> tokens, const HmmMixture& mixture,
                           OutputSpace space = OutputSpace::labels);

// Number of training examples in a flattened prompt (delimiter count).
std::size_t count_examples(std::span<const TokenId> flat_tokens);

// r_n(theta) = (log p(prompt | theta) - log p(prompt | theta*)) / n.
double log_likelihood_ratio_rn(std::span<const TokenId> flat_tokens, const HmmMixture& mixture,
                               std::size_t theta, std::size_t theta_star);

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

inline constexpr double kZ95 = 1.959963984540054;

// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = kZ95);

struct EvalResult {
  std::size_t k = 0;
  std::size_t n = 0;
  std::size_t n_prompts = 0;
  double accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  bool operator==(const EvalResult&) const = default;
};

// Accuracy of f_n against the stored labels.
EvalResult evaluate_group(std::span<const Prompt> prompts, const HmmMixture& mixture,
                          std::size_t threads = 1, OutputSpace space = OutputSpace::labels);

// One EvalResult per (k, n) present in `prompts`, ordered by (k, n).
// Throws Error on an empty prompt list.
std::vector<EvalResult> evaluate(std::span<const Prompt> prompts, const HmmMixture& mixture,
                                 std::size_t threads = 1, OutputSpace space = OutputSpace::labels);

// Comma-separated table: k,n,n_prompts,accuracy,ci_low,ci_high. Doubles are
// written in shortest round-trip form.
void write_eval_table(std::ostream& out, std::span<const EvalResult> rows);
std::vector<EvalResult> read_eval_table(std::istream& in);

}  // namespace ginc
