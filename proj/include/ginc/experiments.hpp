#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ginc/bayes.hpp"
#include "ginc/generator.hpp"
#include "ginc/prompt.hpp"
#include "ginc/theory.hpp"

namespace ginc {

struct PermutationSpec {
  std::size_t k = 5;
  std::size_t n_sets = 10;
  std::size_t n_examples = 4;
  std::size_t n_tests = 200;
};

// Everything a subcommand needs. Loaded from a JSON config file of the form
//
//   {
//     "ginc":       { GincConfig fields },
//     "prompt":     { "k": [..], "n": [..], "n_prompts", "label_mode", "seed",
//                     "vary_test_length" },
//     "experiment": { "threads", "output_space", "vocab_sizes", "ablation",
//                     "unseen_concepts", "prompts_dir", "permutation",
//                     "zero_vs_few_k", "theta_star", "kl_samples",
//                     "tv_samples", "theory_n", "theory_prompts" }
//   }
//
// where every section and key is optional; "k" and "n" accept a number or a
// list. Unknown keys are rejected.
struct ExperimentSpec {
  std::string command;
  GincConfig ginc;
  std::vector<std::size_t> k_values = {3, 5, 8, 10};
  std::vector<std::size_t> n_values = {0, 1, 2, 4, 8, 16, 32, 64};
  std::size_t n_prompts = 2500;
  LabelMode label_mode = LabelMode::test_only;
  std::optional<std::uint64_t> prompt_seed;
  bool vary_test_length = false;

  OutputSpace output_space = OutputSpace::labels;
  std::filesystem::path out_dir = "runs";
  bool quick = false;
  std::size_t threads = 0;

  std::vector<std::size_t> vocab_sizes;  // gen-corpus grid; empty uses ginc.vocab_size
  std::string ablation = "all";          // single-concept | random-transitions | unseen-concepts | all
  std::size_t unseen_concepts = 5;
  std::filesystem::path prompts_dir;  // eval reads prompt files from here when set
  PermutationSpec permutation;
  std::size_t zero_vs_few_k = 10;
  std::size_t theta_star = 0;
  std::size_t kl_samples = 2000;
  std::size_t tv_samples = 100;
  std::size_t theory_n = 64;
  std::size_t theory_prompts = 500;

  // Prompt seed, defaulting to the mixture master seed.
  std::uint64_t resolved_prompt_seed() const { return prompt_seed.value_or(ginc.master_seed); }
  PromptConfig prompt_config(std::size_t k, std::size_t n) const;

  // Throws InvalidConfiguration.
  void validate() const;
};

ExperimentSpec spec_from_json(const nlohmann::json& j);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);
nlohmann::json spec_to_json(const ExperimentSpec& spec);

// Caps prompt counts, Monte-Carlo sample sizes and corpus sizes for fast runs.
void apply_quick_mode(ExperimentSpec& spec);

struct RunManifest {
  std::string command;
  nlohmann::json config;
  nlohmann::json seeds = nlohmann::json::object();
  std::map<std::string, std::string> checksums;  // artifact path relative to out_dir -> sha256
  std::map<std::string, double> timings;         // stage -> seconds
  nlohmann::json summary = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// Accuracy grid with prompts sampled from `source` and predictions made by
// `predictor` (usually the same mixture).
std::vector<EvalResult> run_eval_grid(const HmmMixture& predictor, const HmmMixture& source,
                                      const ExperimentSpec& spec, std::uint64_t prompt_seed,
                                      const std::vector<std::size_t>& k_values,
                                      const std::vector<std::size_t>& n_values);

struct PermutationRow {
  std::size_t set = 0;
  std::string permutation;  // e.g. "2031": example order
  std::size_t concept_id = 0;
  std::size_t start_property = 0;
  std::size_t n_tests = 0;
  double accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::string examples_sha256;  // of the sorted example multiset
};

// Each set draws a concept, a start property and n_examples training
// examples, plus n_tests test inputs sharing that concept and start
// property, then scores every ordering of the examples.
std::vector<PermutationRow> run_permutations(const HmmMixture& mixture, const ExperimentSpec& spec);

struct TvSample {
  std::size_t index = 0;
  std::size_t start_property = 0;
  TvMarginCheck check;
};

struct TheoryReport {
  std::size_t theta_star = 0;
  std::vector<std::size_t> k_values;
  std::vector<ConstantsEstimate> constants;  // one per k
  EpsilonTerms eps;
  std::vector<KlEstimate> kl_table;
  std::vector<DistinguishabilityVerdict> verdicts;  // every k, every theta != theta*
  bool margins_increase_in_k = false;
  bool kl_nonnegative = false;  // every estimate >= -2 stderr
  std::vector<TvSample> tv_samples;
  double eps_sup = 0.0;  // eps_start + eps_delim
  std::vector<BoundValue> bounds;  // one per k
  VaryingLengthResult varying_length;
  std::size_t rn_prompts = 0;
  double rn_all_negative_fraction = 0.0;  // prompts with r_n(theta) < 0 for every theta != theta*
};

TheoryReport build_theory_report(const HmmMixture& mixture, const ExperimentSpec& spec);
nlohmann::json theory_report_to_json(const TheoryReport& report);

// Subcommands. Each writes its artifacts plus manifest.json into spec.out_dir
// and returns the manifest.
RunManifest cmd_gen_corpus(const ExperimentSpec& spec);
RunManifest cmd_gen_prompts(const ExperimentSpec& spec);
RunManifest cmd_eval(const ExperimentSpec& spec);
RunManifest cmd_ablate(const ExperimentSpec& spec);
RunManifest cmd_permutations(const ExperimentSpec& spec);
RunManifest cmd_zero_vs_few(const ExperimentSpec& spec);
RunManifest cmd_theory(const ExperimentSpec& spec);

RunManifest run_command(const ExperimentSpec& spec);

// Low-temperature family used by zero-vs-few: 12 concepts, 100 tokens,
// concept temperature 0.01.
GincConfig zero_vs_few_config(GincConfig base);

std::string prompt_file_name(std::size_t k, std::size_t n);

}  // namespace ginc
