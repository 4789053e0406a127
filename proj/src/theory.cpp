#include "ginc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "ginc/errors.hpp"
#include "ginc/parallel.hpp"

namespace ginc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Probability of moving from joint state `from` into the delimiter column.
double delimiter_block_mass(const Hmm& hmm, std::size_t from) {
  const MemoryMatrix& memory = hmm.memory();
  const std::size_t v = memory.entity_of(from);
  const std::size_t s = memory.property_of(from);
  double mass = 0.0;
  for (std::size_t v2 = 0; v2 < memory.n_entities(); ++v2) {
    mass += hmm.entity_transition()(v, v2) * hmm.property_transition()(s, 0);
  }
  return mass;
}

}  // namespace

ConstantsEstimate estimate_constants(const HmmMixture& mixture, std::size_t theta_star,
                                     std::size_t k) {
  const MemoryMatrix& memory = mixture.memory();
  const Hmm& star = mixture.concept_hmm(theta_star);
  const std::size_t n_states = memory.n_states();
  ConstantsEstimate c;
  c.k = k;

  c.c1 = kInf;
  c.c2 = 0.0;
  for (std::size_t h = 0; h < n_states; ++h) {
    c.c1 = std::min(c.c1, delimiter_block_mass(star, h));
    for (std::size_t theta = 0; theta < mixture.n_concepts(); ++theta) {
      if (theta == theta_star) continue;
      c.c2 = std::max(c.c2, delimiter_block_mass(mixture.concept_hmm(theta), h));
    }
  }

  c.c3 = kInf;
  c.c4 = 0.0;
  for (std::size_t theta = 0; theta < mixture.n_concepts(); ++theta) {
    const auto& start = mixture.concept_hmm(theta).start_distribution();
    for (std::size_t v = 0; v < memory.n_entities(); ++v) {
      const double p = start[memory.state_index({v, 0})];
      c.c3 = std::min(c.c3, p);
      c.c4 = std::max(c.c4, p);
    }
  }

  c.c5 = kInf;
  for (std::size_t from = 0; from < n_states; ++from) {
    for (std::size_t to = 0; to < n_states; ++to) {
      const double p =
          star.entity_transition()(memory.entity_of(from), memory.entity_of(to)) *
          star.property_transition()(memory.property_of(from), memory.property_of(to));
      c.c5 = std::min(c.c5, p);
    }
  }

  // Emissions are deterministic: every emittable token has probability 1
  // from each state that emits it.
  c.c6 = 1.0;
  c.c7 = std::pow(c.c6, static_cast<double>(k)) * c.c5 * c.c5;
  const auto& start = star.start_distribution();
  c.c8 = *std::min_element(start.begin(), start.end());
  return c;
}

EpsilonTerms epsilon_terms(const ConstantsEstimate& c) {
  EpsilonTerms eps;
  eps.eps_start = c.c8 > 0.0 ? -std::log(c.c8) : kInf;
  if (c.c1 > 0.0 && c.c2 > 0.0 && c.c3 > 0.0 && c.c4 > 0.0) {
    eps.eps_delim = 2.0 * (std::log(c.c2) - std::log(c.c1)) + std::log(c.c4) - std::log(c.c3);
  } else {
    eps.eps_delim = kInf;
  }
  eps.finite = std::isfinite(eps.eps_start) && std::isfinite(eps.eps_delim);
  return eps;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInf;
    kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  // Rounding can produce -1e-17 for identical inputs.
  return std::max(kl, 0.0);
}

KlEstimate estimate_kl_j(const HmmMixture& mixture, std::size_t theta_star, std::size_t theta,
                         std::size_t j, std::size_t k, const KlOptions& options) {
  if (j < 1 || j > k) throw InvalidConfiguration("KL position j must lie in [1, k]");
  if (options.n_samples == 0) throw InvalidConfiguration("KL estimate needs samples");
  const Hmm& star = mixture.concept_hmm(theta_star);
  const Hmm& other = mixture.concept_hmm(theta);
  const std::size_t n_props = mixture.memory().n_properties();

  std::vector<double> terms(options.n_samples);
  parallel_for(options.n_samples, options.threads, [&](std::size_t i) {
    Rng rng(derive_seed(options.seed, "kl", {theta_star, j, i}));
    const std::size_t start_property =
        options.start_property != 0 ? options.start_property : 1 + rng.uniform_index(n_props - 1);
    const auto prompt_start = prompt_start_distribution(mixture.memory(), start_property);
    const auto prefix = sample_example(star, start_property, j - 1, rng);
    const auto p = next_token_posterior(prefix, star, prompt_start);
    const ForwardState q_state = run_forward(prefix, other, options.theta_init);
    if (!std::isfinite(q_state.log_likelihood_so_far)) {
      terms[i] = kInf;
      return;
    }
    const auto q = next_token_distribution(q_state, other);
    terms[i] = kl_divergence(p, q);
  });

  KlEstimate est;
  est.theta = theta;
  est.j = j;
  est.n_samples = options.n_samples;
  double sum = 0.0;
  for (double t : terms) {
    if (std::isinf(t)) ++est.n_infinite;
    sum += t;
  }
  est.mean = sum / static_cast<double>(terms.size());
  if (est.n_infinite > 0) {
    est.std_error = kInf;
    return est;
  }
  double ss = 0.0;
  for (double t : terms) ss += (t - est.mean) * (t - est.mean);
  const double n = static_cast<double>(terms.size());
  est.std_error = terms.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return est;
}

std::vector<KlEstimate> estimate_kl_table(const HmmMixture& mixture, std::size_t theta_star,
                                          std::size_t max_k, const KlOptions& options) {
  std::vector<KlEstimate> table;
  for (std::size_t theta = 0; theta < mixture.n_concepts(); ++theta) {
    if (theta == theta_star) continue;
    for (std::size_t j = 1; j <= max_k; ++j) {
      table.push_back(estimate_kl_j(mixture, theta_star, theta, j, max_k, options));
    }
  }
  return table;
}

std::vector<DistinguishabilityVerdict> distinguishability_from_table(
    std::span<const KlEstimate> table, const EpsilonTerms& eps, std::size_t k) {
  std::map<std::size_t, DistinguishabilityVerdict> by_theta;
  std::map<std::size_t, double> variance;
  for (const KlEstimate& e : table) {
    if (e.j > k) continue;
    auto& v = by_theta[e.theta];
    v.theta = e.theta;
    v.kl_sum += e.mean;
    variance[e.theta] += e.std_error * e.std_error;
  }
  std::vector<DistinguishabilityVerdict> out;
  for (auto& [theta, v] : by_theta) {
    v.k = k;
    // Each position draws its prefixes from its own streams; variances add.
    v.kl_sum_stderr = std::sqrt(variance[theta]);
    v.eps_start = eps.eps_start;
    v.eps_delim = eps.eps_delim;
    v.margin = v.kl_sum - (eps.eps_start + eps.eps_delim);
    v.distinguishable = v.margin > 0.0;
    out.push_back(v);
  }
  return out;
}

std::vector<DistinguishabilityVerdict> check_distinguishability(const HmmMixture& mixture,
                                                                std::size_t theta_star,
                                                                std::size_t k,
                                                                const KlOptions& options) {
  const auto table = estimate_kl_table(mixture, theta_star, k, options);
  const auto eps = epsilon_terms(estimate_constants(mixture, theta_star, k));
  return distinguishability_from_table(table, eps, k);
}

double calibration_g(double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw OutOfRange("calibration function needs delta in [0, 1)");
  return 0.5 * ((1.0 - delta) * std::log1p(-delta) + (1.0 + delta) * std::log1p(delta));
}

double calibration_g_inverse(double eps) {
  if (!(eps >= 0.0)) throw OutOfRange("calibration inverse needs eps >= 0");
  if (eps >= std::numbers::ln2) throw OutOfRange("eps >= log 2: the bound is vacuous");
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > kCalibrationInverseTol) {
    const double mid = 0.5 * (lo + hi);
    if (calibration_g(mid) < eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

BoundValue thm3_bound(double eps_sup, std::size_t k) {
  if (k < 2) throw InvalidConfiguration("bound needs k >= 2");
  const double arg = eps_sup / static_cast<double>(k - 1);
  if (!(arg < std::numbers::ln2)) return {kInf, true};
  return {calibration_g_inverse(arg), false};
}

TvMarginCheck tv_margin_check(const HmmMixture& mixture, std::size_t theta_star,
                              std::span<const double> prompt_start,
                              std::span<const TokenId> x_test) {
  const Hmm& star = mixture.concept_hmm(theta_star);
  const MemoryMatrix& memory = mixture.memory();
  if (prompt_start.size() != memory.n_states()) {
    throw InvalidDistribution("prompt start distribution has the wrong number of states");
  }
  TvMarginCheck out;
  std::vector<double> row(memory.n_states());
  for (std::size_t v = 0; v < memory.n_entities(); ++v) {
    for (std::size_t to = 0; to < row.size(); ++to) {
      row[to] = star.entity_transition()(v, memory.entity_of(to)) *
                star.property_transition()(0, memory.property_of(to));
    }
    out.tv_max = std::max(out.tv_max, total_variation(prompt_start, row));
  }

  std::vector<double> label = next_token_posterior(x_test, star, prompt_start);
  const double keep = 1.0 - label[kDelimiterIndex];
  label[kDelimiterIndex] = 0.0;
  double first = 0.0;
  double second = 0.0;
  for (std::size_t o = 0; o < label.size(); ++o) {
    const double p = keep > 0.0 ? label[o] / keep : 0.0;
    if (p > first) {
      second = first;
      first = p;
    } else if (p > second) {
      second = p;
    }
  }
  out.delta_margin = first - second;
  out.satisfied = out.tv_max < out.delta_margin / 4.0;
  return out;
}

VaryingLengthResult varying_length_eval(const HmmMixture& mixture, std::span<const Prompt> prompts,
                                        std::size_t threads) {
  if (prompts.empty()) throw Error("cannot evaluate an empty prompt list");
  std::vector<unsigned char> correct(prompts.size(), 0);
  parallel_for(prompts.size(), threads, [&](std::size_t i) {
    correct[i] = in_context_predict(prompts[i].flat_tokens, mixture) == prompts[i].y_test;
  });
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> tally;  // length -> (hits, total)
  std::size_t hits = 0;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    auto& t = tally[prompts[i].x_test.size() + 1];
    t.first += correct[i];
    t.second += 1;
    hits += correct[i];
  }
  auto make = [](std::size_t length, std::size_t h, std::size_t total) {
    LengthAccuracy a;
    a.test_length = length;
    a.n_prompts = total;
    a.accuracy = static_cast<double>(h) / static_cast<double>(total);
    const Interval ci = wilson_interval(h, total);
    a.ci_low = ci.low;
    a.ci_high = ci.high;
    return a;
  };
  VaryingLengthResult out;
  for (const auto& [length, t] : tally) out.by_length.push_back(make(length, t.first, t.second));
  out.aggregate = make(0, hits, prompts.size());
  return out;
}

}  // namespace ginc
