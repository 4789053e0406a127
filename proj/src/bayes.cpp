#include "ginc/bayes.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "ginc/errors.hpp"
#include "ginc/parallel.hpp"

namespace ginc {

ConceptPosterior normalize_log_weights(std::vector<double> log_weights) {
  ConceptPosterior post;
  const double norm = log_sum_exp(log_weights);
  if (norm == kNegInf) {
    throw UndefinedPosterior("every concept assigns the sequence probability zero");
  }
  post.normalized.resize(log_weights.size());
  for (std::size_t c = 0; c < log_weights.size(); ++c) {
    post.normalized[c] = log_weights[c] == kNegInf ? 0.0 : std::exp(log_weights[c] - norm);
  }
  post.log_weights = std::move(log_weights);
  return post;
}

PromptAnalysis analyse_prompt(std::span<const TokenId> tokens, const HmmMixture& mixture) {
  PromptAnalysis out;
  const std::size_t n_concepts = mixture.n_concepts();
  out.log_likelihoods.resize(n_concepts);
  out.next_token.resize(n_concepts);
  std::vector<double> log_weights(n_concepts);
  for (std::size_t c = 0; c < n_concepts; ++c) {
    const Hmm& hmm = mixture.concept_hmm(c);
    const ForwardState state = run_forward(tokens, hmm);
    out.log_likelihoods[c] = state.log_likelihood_so_far;
    log_weights[c] = std::log(mixture.prior()[c]) + state.log_likelihood_so_far;
    if (std::isfinite(state.log_likelihood_so_far)) {
      out.next_token[c] = next_token_distribution(state, hmm);
    }
  }
  out.posterior = normalize_log_weights(std::move(log_weights));
  out.predictive.assign(mixture.vocabulary().size(), 0.0);
  for (std::size_t c = 0; c < n_concepts; ++c) {
    const double w = out.posterior.normalized[c];
    if (w == 0.0) continue;
    for (std::size_t o = 0; o < out.predictive.size(); ++o) {
      out.predictive[o] += w * out.next_token[c][o];
    }
  }
  return out;
}

ConceptPosterior concept_posterior(std::span<const TokenId> tokens, const HmmMixture& mixture) {
  std::vector<double> log_weights(mixture.n_concepts());
  for (std::size_t c = 0; c < mixture.n_concepts(); ++c) {
    log_weights[c] = std::log(mixture.prior()[c]) +
                     sequence_log_likelihood(tokens, mixture.concept_hmm(c));
  }
  return normalize_log_weights(std::move(log_weights));
}

std::vector<double> posterior_predictive(std::span<const TokenId> tokens,
                                         const HmmMixture& mixture) {
  return analyse_prompt(tokens, mixture).predictive;
}

std::string_view to_string(OutputSpace space) {
  return space == OutputSpace::labels ? "labels" : "vocabulary";
}

OutputSpace parse_output_space(std::string_view text) {
  if (text == "labels") return OutputSpace::labels;
  if (text == "vocabulary") return OutputSpace::vocabulary;
  throw InvalidConfiguration(fmt::format("unknown output space '{}'", text));
}

TokenId in_context_predict(std::span<const TokenId> tokens, const HmmMixture& mixture,
                           OutputSpace space) {
  std::vector<double> predictive = posterior_predictive(tokens, mixture);
  if (space == OutputSpace::labels) predictive[kDelimiterIndex] = -1.0;
  return static_cast<TokenId>(argmax_lowest(predictive));
}

std::size_t count_examples(std::span<const TokenId> flat_tokens) {
  std::size_t n = 0;
  for (TokenId t : flat_tokens) n += t == kDelimiterIndex;
  return n;
}

double log_likelihood_ratio_rn(std::span<const TokenId> flat_tokens, const HmmMixture& mixture,
                               std::size_t theta, std::size_t theta_star) {
  const std::size_t n = count_examples(flat_tokens);
  if (n == 0) throw InvalidConfiguration("r_n needs at least one training example");
  const double ref = sequence_log_likelihood(flat_tokens, mixture.concept_hmm(theta_star));
  if (!std::isfinite(ref)) {
    throw UndefinedPosterior("prompt has probability zero under the reference concept");
  }
  if (theta == theta_star) return 0.0;
  const double ll = sequence_log_likelihood(flat_tokens, mixture.concept_hmm(theta));
  return (ll - ref) / static_cast<double>(n);
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) throw InvalidConfiguration("Wilson interval over zero trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  Interval ci{std::max(0.0, centre - half), std::min(1.0, centre + half)};
  // Keep the point estimate inside the interval despite rounding at 0 and 1.
  ci.low = std::min(ci.low, p);
  ci.high = std::max(ci.high, p);
  return ci;
}

EvalResult evaluate_group(std::span<const Prompt> prompts, const HmmMixture& mixture,
                          std::size_t threads, OutputSpace space) {
  if (prompts.empty()) throw Error("cannot evaluate an empty prompt group");
  std::vector<unsigned char> correct(prompts.size(), 0);
  parallel_for(prompts.size(), threads, [&](std::size_t i) {
    correct[i] = in_context_predict(prompts[i].flat_tokens, mixture, space) == prompts[i].y_test;
  });
  std::size_t hits = 0;
  for (unsigned char c : correct) hits += c;
  EvalResult r;
  r.k = prompts.front().k;
  r.n = prompts.front().n();
  r.n_prompts = prompts.size();
  r.accuracy = static_cast<double>(hits) / static_cast<double>(prompts.size());
  const Interval ci = wilson_interval(hits, prompts.size());
  r.ci_low = ci.low;
  r.ci_high = ci.high;
  return r;
}

std::vector<EvalResult> evaluate(std::span<const Prompt> prompts, const HmmMixture& mixture,
                                 std::size_t threads, OutputSpace space) {
  if (prompts.empty()) throw Error("cannot evaluate an empty prompt list");
  std::map<std::pair<std::size_t, std::size_t>, std::vector<Prompt>> groups;
  for (const Prompt& p : prompts) groups[{p.k, p.n()}].push_back(p);
  std::vector<EvalResult> out;
  out.reserve(groups.size());
  for (const auto& [key, group] : groups) out.push_back(evaluate_group(group, mixture, threads, space));
  return out;
}

void write_eval_table(std::ostream& out, std::span<const EvalResult> rows) {
  out << "k,n,n_prompts,accuracy,ci_low,ci_high\n";
  for (const EvalResult& r : rows) {
    out << fmt::format("{},{},{},{},{},{}\n", r.k, r.n, r.n_prompts, r.accuracy, r.ci_low,
                       r.ci_high);
  }
}

std::vector<EvalResult> read_eval_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "k,n,n_prompts,accuracy,ci_low,ci_high") {
    throw ParseError("missing accuracy table header", 1);
  }
  std::vector<EvalResult> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ParseError("accuracy row needs 6 fields", line_no);
    try {
      EvalResult r;
      r.k = std::stoull(cells[0]);
      r.n = std::stoull(cells[1]);
      r.n_prompts = std::stoull(cells[2]);
      r.accuracy = std::stod(cells[3]);
      r.ci_low = std::stod(cells[4]);
      r.ci_high = std::stod(cells[5]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError("malformed number in accuracy row", line_no);
    }
  }
  return rows;
}

}  // namespace ginc
