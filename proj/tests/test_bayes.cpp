#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ginc/bayes.hpp"
#include "ginc/errors.hpp"
#include "ginc/generator.hpp"
#include "support.hpp"

using namespace ginc;
using namespace ginc::testing;

namespace {

const HmmMixture& default_mixture() {
  static const HmmMixture mix = build_mixture(GincConfig{});
  return mix;
}

std::vector<Prompt> default_prompts(std::size_t k, std::size_t n, std::size_t count,
                                    std::uint64_t seed = 5) {
  PromptConfig pc;
  pc.k = k;
  pc.n = n;
  pc.n_prompts = count;
  pc.seed = seed;
  return sample_prompts(default_mixture(), pc);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

}  // namespace

TEST(ConceptPosterior, EmptyPromptGivesPrior) {
  const ConceptPosterior post = concept_posterior({}, default_mixture());
  for (double w : post.normalized) EXPECT_NEAR(w, 0.2, 1e-15);
}

TEST(ConceptPosterior, ZeroLikelihoodConceptGetsZeroWeight) {
  // Concept 1 can never leave property 1, so "a b" (property 1 then 2) is
  // impossible under it.
  const MemoryMatrix memory(1, 3, {0, 1, 2}, 3);
  Matrix open(3, 3, 1.0 / 3.0);
  Matrix stuck(3, 3, 0.0);
  stuck(0, 0) = stuck(1, 1) = stuck(2, 2) = 1.0;
  const std::vector<double> start(3, 1.0 / 3.0);
  const HmmMixture mix(Vocabulary::build(3), memory, EntityMatrix{Matrix(1, 1, 1.0)},
                       {ConceptParams{open, start}, ConceptParams{stuck, start}}, {0.5, 0.5},
                       Regularity::allow_zeros);
  const std::vector<TokenId> seq = {1, 2};
  const ConceptPosterior post = concept_posterior(seq, mix);
  EXPECT_EQ(post.normalized[1], 0.0);
  EXPECT_EQ(post.normalized[0], 1.0);
  EXPECT_EQ(post.log_weights[1], kNegInf);
  const HmmMixture only_stuck = mix.subset(std::vector<std::size_t>{1});
  EXPECT_THROW(concept_posterior(seq, only_stuck), UndefinedPosterior);
}

TEST(ConceptPosterior, MatchesBayesRuleOracle) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const HmmMixture mix = random_mixture(100 + seed, 2, 3, 5, 2 + seed % 2);
    for_each_sequence(5, 3, [&](const std::vector<TokenId>& seq) {
      std::vector<double> joint(mix.n_concepts());
      for (std::size_t c = 0; c < mix.n_concepts(); ++c) {
        joint[c] = mix.prior()[c] * brute_force_probability(seq, mix.concept_hmm(c));
      }
      const double z = std::accumulate(joint.begin(), joint.end(), 0.0);
      if (z == 0.0) return;
      const ConceptPosterior post = concept_posterior(seq, mix);
      for (std::size_t c = 0; c < joint.size(); ++c) EXPECT_NEAR(post.normalized[c], joint[c] / z, 1e-9);
    });
  }
}

TEST(PosteriorPredictive, SingleConceptEqualsNextTokenPosterior) {
  const std::vector<std::size_t> one = {3};
  const HmmMixture single = default_mixture().subset(one);
  const auto prompt = default_prompts(5, 3, 1)[0];
  const auto got = posterior_predictive(prompt.flat_tokens, single);
  const auto want = next_token_posterior(prompt.flat_tokens, single.concept_hmm(0));
  for (std::size_t o = 0; o < got.size(); ++o) EXPECT_NEAR(got[o], want[o], 1e-12);
}

TEST(PosteriorPredictive, MatchesMixtureSumOracle) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const HmmMixture mix = random_mixture(200 + seed, 3, 2, 4, 3);
    for_each_sequence(4, 3, [&](const std::vector<TokenId>& seq) {
      std::vector<double> want(4, 0.0);
      double z = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const Hmm& hmm = mix.concept_hmm(c);
        const double p = brute_force_probability(seq, hmm);
        if (p == 0.0) continue;
        const auto next = brute_force_next_token(seq, hmm);
        for (std::size_t o = 0; o < 4; ++o) want[o] += mix.prior()[c] * p * next[o];
        z += mix.prior()[c] * p;
      }
      if (z == 0.0) return;
      const auto got = posterior_predictive(seq, mix);
      EXPECT_NEAR(std::accumulate(got.begin(), got.end(), 0.0), 1.0, 1e-9);
      for (std::size_t o = 0; o < 4; ++o) EXPECT_NEAR(got[o], want[o] / z, 1e-9);
    });
  }
}

TEST(PosteriorPredictive, ApproachesPromptConceptAsNGrows) {
  const std::vector<std::size_t> grid = {0, 1, 2, 4, 8, 16, 32, 64};
  std::vector<double> mean_tv;
  for (std::size_t n : grid) {
    double tv = 0.0;
    const auto prompts = default_prompts(10, n, 100);
    for (const Prompt& p : prompts) {
      tv += total_variation(posterior_predictive(p.flat_tokens, default_mixture()),
                            next_token_posterior(p.flat_tokens, default_mixture().concept_hmm(p.concept_id)));
    }
    mean_tv.push_back(tv / 100.0);
  }
  EXPECT_LT(mean_tv.back(), 0.05);
  EXPECT_LT(mean_tv.back(), mean_tv.front());
  int inversions = 0;
  for (std::size_t i = 1; i < mean_tv.size(); ++i) inversions += mean_tv[i] > mean_tv[i - 1] + 0.01;
  EXPECT_LE(inversions, 1);
}

TEST(InContextPredict, TieBreaksLowAndPointMass) {
  // Two concepts that are mirror images: after the empty prefix tokens a and
  // b are equally likely.
  const MemoryMatrix memory(1, 3, {0, 1, 2}, 3);
  Matrix B(3, 3, 1.0 / 3.0);
  const HmmMixture sym(Vocabulary::build(3), memory, EntityMatrix{Matrix(1, 1, 1.0)},
                       {ConceptParams{B, {0.1, 0.6, 0.3}}, ConceptParams{B, {0.1, 0.3, 0.6}}},
                       {0.5, 0.5});
  EXPECT_EQ(in_context_predict({}, sym), 1u);
  const HmmMixture point(Vocabulary::build(3), memory, EntityMatrix{Matrix(1, 1, 1.0)},
                         {ConceptParams{B, {0.0, 0.0, 1.0}}}, {1.0}, Regularity::allow_zeros);
  EXPECT_EQ(in_context_predict({}, point), 2u);
}

TEST(InContextPredict, OutputSpaceControlsDelimiter) {
  const MemoryMatrix memory(1, 2, {0, 1}, 2);
  const HmmMixture mix(Vocabulary::build(2), memory, EntityMatrix{Matrix(1, 1, 1.0)},
                       {ConceptParams{Matrix(2, 2, 0.5), {0.9, 0.1}}}, {1.0});
  EXPECT_EQ(in_context_predict({}, mix, OutputSpace::vocabulary), 0u);
  EXPECT_EQ(in_context_predict({}, mix, OutputSpace::labels), 1u);
  EXPECT_EQ(parse_output_space("vocabulary"), OutputSpace::vocabulary);
  EXPECT_THROW(parse_output_space("all"), InvalidConfiguration);
}

TEST(InContextPredict, AgreesWithLabelOnDistinguishableToy) {
  // Two concepts with very different deterministic-ish property chains.
  const MemoryMatrix memory(1, 4, {0, 1, 2, 3}, 4);
  Matrix fwd(4, 4, 0.02), back(4, 4, 0.02);
  for (std::size_t s = 0; s < 4; ++s) {
    fwd(s, (s % 3) + 1) = 0.94;
    back(s, ((s + 1) % 3) + 1) = 0.94;
  }
  const std::vector<double> start(4, 0.25);
  const HmmMixture mix(Vocabulary::build(4), memory, EntityMatrix{Matrix(1, 1, 1.0)},
                       {ConceptParams{fwd, start}, ConceptParams{back, start}}, {0.5, 0.5});
  PromptConfig pc;
  pc.k = 4;
  pc.n = 16;
  pc.n_prompts = 100;
  pc.seed = 3;
  const auto prompts = sample_prompts(mix, pc);
  std::size_t hits = 0;
  for (const Prompt& p : prompts) hits += in_context_predict(p.flat_tokens, mix) == p.y_test;
  EXPECT_EQ(hits, prompts.size());
}

TEST(LikelihoodRatio, IdenticalConceptIsZero) {
  const auto p = default_prompts(10, 4, 1)[0];
  EXPECT_EQ(log_likelihood_ratio_rn(p.flat_tokens, default_mixture(), p.concept_id, p.concept_id), 0.0);
  const auto zero = default_prompts(10, 0, 1)[0];
  EXPECT_THROW(log_likelihood_ratio_rn(zero.flat_tokens, default_mixture(), 0, 1), InvalidConfiguration);
}

TEST(LikelihoodRatio, ZeroReferenceLikelihoodThrows) {
  const MemoryMatrix memory(1, 3, {0, 1, 2}, 3);
  Matrix stuck(3, 3, 0.0);
  stuck(0, 0) = stuck(1, 1) = stuck(2, 2) = 1.0;
  const std::vector<double> start(3, 1.0 / 3.0);
  const HmmMixture mix(Vocabulary::build(3), memory, EntityMatrix{Matrix(1, 1, 1.0)},
                       {ConceptParams{Matrix(3, 3, 1.0 / 3.0), start}, ConceptParams{stuck, start}},
                       {0.5, 0.5}, Regularity::allow_zeros);
  const std::vector<TokenId> seq = {1, 2, 0};
  EXPECT_THROW(log_likelihood_ratio_rn(seq, mix, 0, 1), UndefinedPosterior);
  EXPECT_EQ(log_likelihood_ratio_rn(seq, mix, 1, 0), kNegInf);
}

TEST(LikelihoodRatio, NegativeForOtherConceptsAtN64) {
  const auto prompts = default_prompts(10, 64, 200, 9);
  std::size_t ok = 0;
  for (const Prompt& p : prompts) {
    bool all = true;
    for (std::size_t t = 0; t < 5; ++t) {
      if (t != p.concept_id) all = all && log_likelihood_ratio_rn(p.flat_tokens, default_mixture(), t, p.concept_id) < 0.0;
    }
    ok += all;
  }
  EXPECT_GE(ok, 190u);
}

TEST(LikelihoodRatio, MedianTrajectoryStabilizes) {
  // One long prompt per trial; r_n is recomputed on its first n examples.
  const std::size_t trials = 60;
  const auto prompts = default_prompts(10, 64, trials, 13);
  std::vector<std::vector<double>> by_n(64);
  for (const Prompt& p : prompts) {
    const std::size_t other = (p.concept_id + 1) % 5;
    const Hmm& star = default_mixture().concept_hmm(p.concept_id);
    const Hmm& alt = default_mixture().concept_hmm(other);
    ForwardState a = forward_init(star), b = forward_init(alt);
    std::size_t n = 0;
    for (TokenId t : p.flat_tokens) {
      advance(a, star, t);
      advance(b, alt, t);
      if (t == kDelimiterIndex) {
        by_n[n].push_back((b.log_likelihood_so_far - a.log_likelihood_so_far) / static_cast<double>(n + 1));
        ++n;
      }
    }
  }
  std::vector<double> medians;
  for (const auto& v : by_n) medians.push_back(median(v));
  const std::vector<double> first(medians.begin(), medians.begin() + 3);
  const std::vector<double> last(medians.end() - 3, medians.end());
  EXPECT_LT(variance(last), variance(first));
  EXPECT_LT(medians.back(), 0.0);
}

TEST(Wilson, AllCorrectAndIndependentFormula) {
  const Interval all = wilson_interval(10, 10);
  EXPECT_EQ(all.high, 1.0);
  EXPECT_LE(all.low, 1.0);
  const double z = 1.959963984540054;
  const double n = 2.0, p = 0.5;
  const double centre = (p + z * z / (2 * n)) / (1 + z * z / n);
  const double half = z / (1 + z * z / n) * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n));
  const Interval half_right = wilson_interval(1, 2);
  EXPECT_NEAR(half_right.low, centre - half, 1e-15);
  EXPECT_NEAR(half_right.high, centre + half, 1e-15);
  EXPECT_THROW(wilson_interval(0, 0), InvalidConfiguration);
}

TEST(Evaluate, AllCorrectBatchAndHalfBatch) {
  const std::vector<std::size_t> one = {0};
  const HmmMixture single = default_mixture().subset(one);
  PromptConfig pc;
  pc.k = 10;
  pc.n = 0;
  pc.n_prompts = 20;
  auto prompts = sample_prompts(single, pc);
  for (Prompt& p : prompts) p.y_test = in_context_predict(p.flat_tokens, single);
  const EvalResult all = evaluate_group(prompts, single);
  EXPECT_EQ(all.accuracy, 1.0);
  EXPECT_EQ(all.ci_high, 1.0);

  std::vector<Prompt> two(prompts.begin(), prompts.begin() + 2);
  two[1].y_test = two[1].y_test == 1 ? 2 : 1;
  const EvalResult half = evaluate_group(two, single);
  EXPECT_EQ(half.accuracy, 0.5);
  EXPECT_EQ(half.ci_low, wilson_interval(1, 2).low);
  EXPECT_LE(half.ci_low, half.accuracy);
  EXPECT_GE(half.ci_high, half.accuracy);
  EXPECT_THROW(evaluate(std::vector<Prompt>{}, single), Error);
}

TEST(Evaluate, GroupsByKAndN) {
  auto a = default_prompts(3, 1, 10);
  const auto b = default_prompts(5, 0, 7);
  a.insert(a.end(), b.begin(), b.end());
  const auto rows = evaluate(a, default_mixture());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].k, 3u);
  EXPECT_EQ(rows[0].n_prompts, 10u);
  EXPECT_EQ(rows[1].k, 5u);
  EXPECT_EQ(rows[1].n, 0u);
  for (const auto& r : rows) {
    EXPECT_LE(r.ci_low, r.accuracy);
    EXPECT_LE(r.accuracy, r.ci_high);
  }
}

TEST(Evaluate, TableRoundTrip) {
  const std::vector<EvalResult> rows = {{3, 0, 500, 0.388, 0.1 + 0.2, 0.43},
                                        {10, 64, 2500, 1.0 / 3.0, 0.31, 0.35}};
  std::ostringstream out;
  write_eval_table(out, rows);
  std::istringstream in(out.str());
  EXPECT_EQ(read_eval_table(in), rows);
  std::istringstream bad("k,n,n_prompts,accuracy,ci_low,ci_high\n1,2,3\n");
  try {
    read_eval_table(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), 2u);
  }
}

TEST(BayesProperties, ArgmaxScaleFree) {
  const auto p = default_prompts(8, 4, 1)[0];
  const PromptAnalysis a = analyse_prompt(p.flat_tokens, default_mixture());
  for (double shift : {-1e3, -7.5, 0.0, 3.25, 1e3}) {
    std::vector<double> w = a.posterior.log_weights;
    for (double& x : w) x += shift;
    const ConceptPosterior shifted = normalize_log_weights(w);
    EXPECT_EQ(argmax_lowest(shifted.normalized), argmax_lowest(a.posterior.normalized));
  }
}

TEST(BayesProperties, PosteriorConcentratesOnPromptConcept) {
  const std::vector<std::size_t> grid = {0, 1, 2, 4, 8, 16, 32, 64};
  std::vector<double> mass;
  for (std::size_t n : grid) {
    double m = 0.0;
    const auto prompts = default_prompts(10, n, 150, 21);
    for (const Prompt& p : prompts) m += concept_posterior(p.flat_tokens, default_mixture()).normalized[p.concept_id];
    mass.push_back(m / 150.0);
  }
  for (std::size_t i = 1; i < mass.size(); ++i) EXPECT_GE(mass[i], mass[i - 1] - 0.01);
  EXPECT_GT(mass.back(), 0.95);
}
