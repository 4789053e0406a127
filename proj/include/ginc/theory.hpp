#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ginc/bayes.hpp"
#include "ginc/hmm.hpp"
#include "ginc/prompt.hpp"

namespace ginc {

// Regularity constants of a mixture relative to a prompt concept theta*.
//   c1  min over h of p(next state in delimiter column | h, theta*)
//   c2  max over h and theta != theta* of the same block probability
//   c3  min over theta and delimiter states of start mass
//   c4  max over theta and delimiter states of start mass
//   c5  min joint transition probability under theta*
//   c6  min emission probability of an emittable token (1: emissions are
//       deterministic)
//   c7  c6^k * c5^2
//   c8  min start mass under theta*
struct ConstantsEstimate {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
  double c6 = 0.0;
  double c7 = 0.0;
  double c8 = 0.0;
  std::size_t k = 0;
};

ConstantsEstimate estimate_constants(const HmmMixture& mixture, std::size_t theta_star,
                                     std::size_t k);

struct EpsilonTerms {
  double eps_start = 0.0;  // log(1 / c8)
  double eps_delim = 0.0;  // 2 (log c2 - log c1) + log c4 - log c3
  bool finite = true;      // false when a logged constant was 0
};

EpsilonTerms epsilon_terms(const ConstantsEstimate& constants);

struct KlOptions {
  std::size_t n_samples = 2000;
  std::uint64_t seed = 0;
  // Start distribution used to score prefixes under theta; empty means the
  // concept's own pretraining start distribution.
  std::vector<double> theta_init;
  // Start property of the prompt distribution; 0 draws one uniformly from
  // [1, n_properties) per sample.
  std::size_t start_property = 0;
  std::size_t threads = 1;
};

struct KlEstimate {
  std::size_t theta = 0;
  std::size_t j = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_infinite = 0;  // prefixes where p_theta misses support of p_prompt
};

// KL(p || q) over a finite alphabet; +inf when q is 0 where p is positive.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Monte-Carlo estimate of KL_j(theta* || theta): prefixes O[1:j-1] are drawn
// from the prompt example sampler (stream derive_seed(seed, "kl",
// {theta*, j, i}), shared across theta), and each term is the exact KL between
// next_token_posterior under theta* with the prompt start distribution and
// next_token_posterior under theta.
KlEstimate estimate_kl_j(const HmmMixture& mixture, std::size_t theta_star, std::size_t theta,
                         std::size_t j, std::size_t k, const KlOptions& options);

// All KL_j for theta != theta* and j = 1..max_k.
std::vector<KlEstimate> estimate_kl_table(const HmmMixture& mixture, std::size_t theta_star,
                                          std::size_t max_k, const KlOptions& options);

struct DistinguishabilityVerdict {
  std::size_t theta = 0;
  std::size_t k = 0;
  double kl_sum = 0.0;
  double kl_sum_stderr = 0.0;
  double eps_start = 0.0;
  double eps_delim = 0.0;
  double margin = 0.0;  // kl_sum - (eps_start + eps_delim)
  bool distinguishable = false;
};

// Margins for one k from a precomputed KL table (entries with j <= k).
std::vector<DistinguishabilityVerdict> distinguishability_from_table(
    std::span<const KlEstimate> table, const EpsilonTerms& eps, std::size_t k);

std::vector<DistinguishabilityVerdict> check_distinguishability(const HmmMixture& mixture,
                                                                std::size_t theta_star,
                                                                std::size_t k,
                                                                const KlOptions& options);

// g(delta) = ((1 - delta) log(1 - delta) + (1 + delta) log(1 + delta)) / 2
// on [0, 1).
double calibration_g(double delta);

inline constexpr double kCalibrationInverseTol = 1e-10;

// Bisection inverse of g on [0, log 2). Throws OutOfRange for eps >= log 2.
double calibration_g_inverse(double eps);

struct BoundValue {
  double value = 0.0;
  bool vacuous = false;  // argument reached log 2; value is +inf
};

// g^{-1}(eps_sup / (k - 1)), the excess-risk bound with its O(.) constant set
// to 1 (an up-to-constant instantiation).
BoundValue thm3_bound(double eps_sup, std::size_t k);

struct TvMarginCheck {
  double tv_max = 0.0;
  double delta_margin = 0.0;
  bool satisfied = false;  // tv_max < delta_margin / 4
};

// tv_max: max over delimiter states of TV(prompt_start, p(. | h_delim,
// theta*)). delta_margin: gap between the two most likely labels of
// p_prompt(y | x_test), renormalized over non-delimiter tokens since prompt
// examples never emit the delimiter.
TvMarginCheck tv_margin_check(const HmmMixture& mixture, std::size_t theta_star,
                              std::span<const double> prompt_start,
                              std::span<const TokenId> x_test);

struct LengthAccuracy {
  std::size_t test_length = 0;  // |x_test| + 1
  std::size_t n_prompts = 0;
  double accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct VaryingLengthResult {
  std::vector<LengthAccuracy> by_length;  // ascending test length
  LengthAccuracy aggregate;               // test_length = 0
};

// Accuracy of f_n grouped by test-example length.
VaryingLengthResult varying_length_eval(const HmmMixture& mixture, std::span<const Prompt> prompts,
                                        std::size_t threads = 1);

}  // namespace ginc
