#include "ginc/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "ginc/config_json.hpp"
#include "ginc/corpus_io.hpp"
#include "ginc/errors.hpp"
#include "ginc/file_util.hpp"
#include "ginc/parallel.hpp"
#include "ginc/prompt_io.hpp"
#include "ginc/svg_plot.hpp"

namespace ginc {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const char* section) {
  if (!j.is_object()) throw InvalidConfiguration(fmt::format("'{}' must be a JSON object", section));
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw InvalidConfiguration(fmt::format("unknown key '{}' in '{}'", key, section));
    }
  }
}

std::vector<std::size_t> size_list(const json& j) {
  if (j.is_array()) return j.get<std::vector<std::size_t>>();
  return {j.get<std::size_t>()};
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Output directory that records a checksum for every artifact it writes.
class Artifacts {
 public:
  Artifacts(std::filesystem::path root, RunManifest& manifest)
      : root_(std::move(root)), manifest_(manifest) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec || !std::filesystem::is_directory(root_)) {
      throw IoError(fmt::format("cannot create output directory '{}'", root_.string()));
    }
  }

  const std::filesystem::path& root() const { return root_; }

  void write(const std::string& relative, const std::string& content) {
    const std::filesystem::path path = root_ / relative;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, content);
    manifest_.checksums[relative] = sha256_hex(content);
  }

  void record_file(const std::string& relative) {
    manifest_.checksums[relative] = sha256_file(root_ / relative);
  }

  void finish() {
    write_file_atomic(root_ / "manifest.json", manifest_.to_json().dump(2) + "\n");
  }

 private:
  std::filesystem::path root_;
  RunManifest& manifest_;
};

RunManifest start_manifest(const ExperimentSpec& spec, const std::string& command) {
  RunManifest m;
  m.command = command;
  m.config = spec_to_json(spec);
  return m;
}

json mixture_seed_table(const GincConfig& config) {
  json property = json::array();
  json start = json::array();
  for (std::size_t c = 0; c < config.n_concepts; ++c) {
    property.push_back(derive_seed(config.master_seed, "property", {c}));
    start.push_back(derive_seed(config.master_seed, "start", {c}));
  }
  return {{"master_seed", config.master_seed},
          {"entity", derive_seed(config.master_seed, "entity")},
          {"memory", derive_seed(config.master_seed, "memory")},
          {"property", property},
          {"start", start}};
}

std::string eval_table_text(std::span<const EvalResult> rows) {
  std::ostringstream out;
  write_eval_table(out, rows);
  return out.str();
}

double accuracy_at(std::span<const EvalResult> rows, std::size_t k, std::size_t n) {
  for (const EvalResult& r : rows) {
    if (r.k == k && r.n == n) return r.accuracy;
  }
  return std::nan("");
}

LinePlot accuracy_plot(const std::string& title, std::span<const EvalResult> rows,
                       const std::vector<std::size_t>& k_values,
                       const std::vector<std::size_t>& n_values) {
  LinePlot plot;
  plot.title = title;
  plot.x_label = "training examples n";
  plot.y_label = "accuracy";
  for (std::size_t n : n_values) plot.x_ticks.push_back(std::to_string(n));
  for (std::size_t k : k_values) {
    PlotSeries s;
    s.label = fmt::format("k = {}", k);
    for (std::size_t n : n_values) s.y.push_back(accuracy_at(rows, k, n));
    plot.series.push_back(std::move(s));
  }
  return plot;
}

// Accuracy change from the smallest to the largest n, per k.
json flatness_summary(std::span<const EvalResult> rows, const ExperimentSpec& spec) {
  json out = json::array();
  const std::size_t n_lo = *std::min_element(spec.n_values.begin(), spec.n_values.end());
  const std::size_t n_hi = *std::max_element(spec.n_values.begin(), spec.n_values.end());
  for (std::size_t k : spec.k_values) {
    const double lo = accuracy_at(rows, k, n_lo);
    const double hi = accuracy_at(rows, k, n_hi);
    out.push_back({{"k", k},
                   {"n_low", n_lo},
                   {"n_high", n_hi},
                   {"accuracy_low", lo},
                   {"accuracy_high", hi},
                   {"change", hi - lo}});
  }
  return out;
}

std::vector<Prompt> prompts_for_cell(const HmmMixture& source, const ExperimentSpec& spec,
                                     std::uint64_t seed, std::size_t k, std::size_t n) {
  PromptConfig pc = spec.prompt_config(k, n);
  pc.seed = seed;
  return sample_prompts(source, pc, spec.threads);
}

}  // namespace

PromptConfig ExperimentSpec::prompt_config(std::size_t k, std::size_t n) const {
  PromptConfig pc;
  pc.k = k;
  pc.n = n;
  pc.n_prompts = n_prompts;
  pc.label_mode = label_mode;
  pc.seed = resolved_prompt_seed();
  pc.vary_test_length = vary_test_length;
  return pc;
}

void ExperimentSpec::validate() const {
  ginc.validate();
  if (k_values.empty() || n_values.empty()) throw InvalidConfiguration("k and n grids must be non-empty");
  for (std::size_t k : k_values) {
    if (k < 2) throw InvalidConfiguration("example length k must be at least 2");
  }
  if (n_prompts == 0) throw InvalidConfiguration("n_prompts must be positive");
  static const std::set<std::string> ablations = {"all", "single-concept", "random-transitions",
                                                  "unseen-concepts"};
  if (!ablations.contains(ablation)) {
    throw InvalidConfiguration(fmt::format("unknown ablation '{}'", ablation));
  }
  if (unseen_concepts == 0) throw InvalidConfiguration("unseen_concepts must be positive");
  if (permutation.k < 2 || permutation.n_sets == 0 || permutation.n_examples == 0 ||
      permutation.n_tests == 0) {
    throw InvalidConfiguration("permutation settings must be positive with k >= 2");
  }
  if (permutation.n_examples > 8) {
    throw InvalidConfiguration("permutation experiment supports at most 8 examples per set");
  }
  if (zero_vs_few_k < 2) throw InvalidConfiguration("zero_vs_few_k must be at least 2");
  if (theta_star >= ginc.n_concepts) throw InvalidConfiguration("theta_star outside the concept family");
  if (kl_samples == 0 || theory_prompts == 0) {
    throw InvalidConfiguration("Monte-Carlo sample sizes must be positive");
  }
  for (std::size_t v : vocab_sizes) {
    if (v < 2) throw InvalidConfiguration("vocab sizes must be at least 2");
  }
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec spec;
  reject_unknown(j, {"ginc", "prompt", "experiment"}, "config");
  try {
    if (j.contains("ginc")) spec.ginc = j.at("ginc").get<GincConfig>();
    if (j.contains("prompt")) {
      const json& p = j.at("prompt");
      reject_unknown(p, {"k", "n", "n_prompts", "label_mode", "seed", "vary_test_length"}, "prompt");
      if (p.contains("k")) spec.k_values = size_list(p.at("k"));
      if (p.contains("n")) spec.n_values = size_list(p.at("n"));
      if (p.contains("n_prompts")) spec.n_prompts = p.at("n_prompts").get<std::size_t>();
      if (p.contains("label_mode")) {
        spec.label_mode = parse_label_mode(p.at("label_mode").get<std::string>());
      }
      if (p.contains("seed")) spec.prompt_seed = p.at("seed").get<std::uint64_t>();
      if (p.contains("vary_test_length")) spec.vary_test_length = p.at("vary_test_length").get<bool>();
    }
    if (j.contains("experiment")) {
      const json& e = j.at("experiment");
      reject_unknown(e,
                     {"threads", "output_space", "vocab_sizes", "ablation", "unseen_concepts",
                      "prompts_dir", "permutation", "zero_vs_few_k", "theta_star", "kl_samples",
                      "tv_samples", "theory_n", "theory_prompts"},
                     "experiment");
      auto get = [&](const char* key, auto& field) {
        if (e.contains(key)) e.at(key).get_to(field);
      };
      get("threads", spec.threads);
      if (e.contains("output_space")) {
        spec.output_space = parse_output_space(e.at("output_space").get<std::string>());
      }
      if (e.contains("vocab_sizes")) spec.vocab_sizes = size_list(e.at("vocab_sizes"));
      get("ablation", spec.ablation);
      get("unseen_concepts", spec.unseen_concepts);
      if (e.contains("prompts_dir")) spec.prompts_dir = e.at("prompts_dir").get<std::string>();
      if (e.contains("permutation")) {
        const json& q = e.at("permutation");
        reject_unknown(q, {"k", "n_sets", "n_examples", "n_tests"}, "permutation");
        if (q.contains("k")) q.at("k").get_to(spec.permutation.k);
        if (q.contains("n_sets")) q.at("n_sets").get_to(spec.permutation.n_sets);
        if (q.contains("n_examples")) q.at("n_examples").get_to(spec.permutation.n_examples);
        if (q.contains("n_tests")) q.at("n_tests").get_to(spec.permutation.n_tests);
      }
      get("zero_vs_few_k", spec.zero_vs_few_k);
      get("theta_star", spec.theta_star);
      get("kl_samples", spec.kl_samples);
      get("tv_samples", spec.tv_samples);
      get("theory_n", spec.theory_n);
      get("theory_prompts", spec.theory_prompts);
    }
  } catch (const json::exception& e) {
    throw InvalidConfiguration(fmt::format("bad config value: {}", e.what()));
  }
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()), e.byte);
  }
  return spec_from_json(j);
}

json spec_to_json(const ExperimentSpec& spec) {
  return {
      {"ginc", spec.ginc},
      {"prompt",
       {{"k", spec.k_values},
        {"n", spec.n_values},
        {"n_prompts", spec.n_prompts},
        {"label_mode", to_string(spec.label_mode)},
        {"seed", spec.resolved_prompt_seed()},
        {"vary_test_length", spec.vary_test_length}}},
      {"experiment",
       {{"threads", spec.threads},
        {"output_space", to_string(spec.output_space)},
        {"vocab_sizes", spec.vocab_sizes},
        {"ablation", spec.ablation},
        {"unseen_concepts", spec.unseen_concepts},
        {"prompts_dir", spec.prompts_dir.string()},
        {"permutation",
         {{"k", spec.permutation.k},
          {"n_sets", spec.permutation.n_sets},
          {"n_examples", spec.permutation.n_examples},
          {"n_tests", spec.permutation.n_tests}}},
        {"zero_vs_few_k", spec.zero_vs_few_k},
        {"theta_star", spec.theta_star},
        {"kl_samples", spec.kl_samples},
        {"tv_samples", spec.tv_samples},
        {"theory_n", spec.theory_n},
        {"theory_prompts", spec.theory_prompts}}},
  };
}

void apply_quick_mode(ExperimentSpec& spec) {
  spec.quick = true;
  spec.n_prompts = std::min<std::size_t>(spec.n_prompts, 500);
  spec.kl_samples = std::min<std::size_t>(spec.kl_samples, 500);
  spec.theory_prompts = std::min<std::size_t>(spec.theory_prompts, 200);
  spec.permutation.n_tests = std::min<std::size_t>(spec.permutation.n_tests, 100);
  spec.ginc.n_train_docs = std::min<std::size_t>(spec.ginc.n_train_docs, 100);
  spec.ginc.n_val_docs = std::min<std::size_t>(spec.ginc.n_val_docs, 10);
}

json RunManifest::to_json() const {
  json sums = json::object();
  for (const auto& [name, sum] : checksums) sums[name] = sum;
  json times = json::object();
  for (const auto& [name, t] : timings) times[name] = t;
  return {{"format", "ginc-manifest"},
          {"version", 1},
          {"command", command},
          {"config", config},
          {"seeds", seeds},
          {"checksums", sums},
          {"timings_seconds", times},
          {"summary", summary}};
}

std::string prompt_file_name(std::size_t k, std::size_t n) {
  return fmt::format("prompts_k{}_n{}.txt", k, n);
}

std::vector<EvalResult> run_eval_grid(const HmmMixture& predictor, const HmmMixture& source,
                                      const ExperimentSpec& spec, std::uint64_t prompt_seed,
                                      const std::vector<std::size_t>& k_values,
                                      const std::vector<std::size_t>& n_values) {
  std::vector<EvalResult> rows;
  for (std::size_t k : k_values) {
    for (std::size_t n : n_values) {
      const auto prompts = prompts_for_cell(source, spec, prompt_seed, k, n);
      rows.push_back(evaluate_group(prompts, predictor, spec.threads, spec.output_space));
    }
  }
  return rows;
}

GincConfig zero_vs_few_config(GincConfig base) {
  base.vocab_size = 100;
  base.n_concepts = 12;
  base.concept_temperature = 0.01;
  return base;
}

// ---------------------------------------------------------------- gen-corpus

RunManifest cmd_gen_corpus(const ExperimentSpec& spec) {
  spec.validate();
  RunManifest manifest = start_manifest(spec, "gen-corpus");
  Artifacts out(spec.out_dir, manifest);
  std::vector<std::size_t> sizes = spec.vocab_sizes;
  if (sizes.empty()) sizes.push_back(spec.ginc.vocab_size);
  const bool grid = sizes.size() > 1;

  json corpora = json::array();
  for (std::size_t vocab : sizes) {
    GincConfig config = spec.ginc;
    config.vocab_size = vocab;
    const std::string prefix = grid ? fmt::format("vocab{}/", vocab) : std::string();
    if (grid) std::filesystem::create_directories(spec.out_dir / prefix);
    Stopwatch build_time;
    const HmmMixture mixture = build_mixture(config);
    const std::string problem = check_construction_invariants(mixture, config);
    if (!problem.empty()) throw ConstructionError(problem);
    out.write(prefix + "mixture.json", mixture_to_json(mixture).dump(1) + "\n");
    manifest.timings[prefix + "build_mixture"] = build_time.seconds();

    std::size_t total_tokens = 0;
    for (const auto& [split, count, length] :
         {std::tuple{std::string("train"), config.n_train_docs, config.train_doc_len},
          std::tuple{std::string("val"), config.n_val_docs, config.val_doc_len}}) {
      Stopwatch t;
      Corpus corpus;
      corpus.vocabulary = mixture.vocabulary();
      corpus.config = config;
      corpus.documents = sample_documents(mixture, config.master_seed, split, count, length, spec.threads);
      for (const Document& d : corpus.documents) total_tokens += d.tokens.size();
      const std::string file = prefix + split + ".txt";
      write_corpus(spec.out_dir / file, corpus);
      out.record_file(file);
      out.record_file(corpus_meta_path(file).string());
      manifest.timings[prefix + split] = t.seconds();
    }
    manifest.seeds[fmt::format("vocab{}", vocab)] = mixture_seed_table(config);
    corpora.push_back({{"vocab_size", vocab},
                       {"directory", prefix.empty() ? "." : prefix},
                       {"n_train_docs", config.n_train_docs},
                       {"n_val_docs", config.n_val_docs},
                       {"total_tokens", total_tokens},
                       {"invariants", "ok"}});
  }
  manifest.seeds["documents"] = "derive_seed(master_seed, \"doc/<split>\", {i})";
  manifest.summary["corpora"] = corpora;
  out.finish();
  return manifest;
}

// --------------------------------------------------------------- gen-prompts

RunManifest cmd_gen_prompts(const ExperimentSpec& spec) {
  spec.validate();
  RunManifest manifest = start_manifest(spec, "gen-prompts");
  Artifacts out(spec.out_dir, manifest);
  const HmmMixture mixture = build_mixture(spec.ginc);
  out.write("mixture.json", mixture_to_json(mixture).dump(1) + "\n");
  manifest.seeds["mixture"] = mixture_seed_table(spec.ginc);
  manifest.seeds["prompt_seed"] = spec.resolved_prompt_seed();
  manifest.seeds["prompts"] = "derive_seed(prompt_seed, \"prompt\", {k, n, i})";

  json files = json::array();
  for (std::size_t k : spec.k_values) {
    for (std::size_t n : spec.n_values) {
      Stopwatch t;
      const auto prompts = prompts_for_cell(mixture, spec, spec.resolved_prompt_seed(), k, n);
      std::ostringstream text;
      write_prompts(text, prompts, mixture.vocabulary());
      const std::string name = prompt_file_name(k, n);
      out.write(name, text.str());
      manifest.timings[name] = t.seconds();
      files.push_back({{"file", name}, {"k", k}, {"n", n}, {"n_prompts", prompts.size()}});
    }
  }
  manifest.summary["files"] = files;
  manifest.summary["label_mode"] = to_string(spec.label_mode);
  out.finish();
  return manifest;
}

// ---------------------------------------------------------------------- eval

RunManifest cmd_eval(const ExperimentSpec& spec) {
  spec.validate();
  RunManifest manifest = start_manifest(spec, "eval");
  Artifacts out(spec.out_dir, manifest);
  const HmmMixture mixture = build_mixture(spec.ginc);
  manifest.seeds["mixture"] = mixture_seed_table(spec.ginc);
  manifest.seeds["prompt_seed"] = spec.resolved_prompt_seed();

  Stopwatch t;
  std::vector<EvalResult> rows;
  if (spec.prompts_dir.empty()) {
    rows = run_eval_grid(mixture, mixture, spec, spec.resolved_prompt_seed(), spec.k_values,
                         spec.n_values);
  } else {
    for (std::size_t k : spec.k_values) {
      for (std::size_t n : spec.n_values) {
        const PromptFile file = read_prompts(spec.prompts_dir / prompt_file_name(k, n));
        if (!(file.vocabulary == mixture.vocabulary())) {
          throw InvalidConfiguration("prompt file vocabulary does not match the mixture");
        }
        rows.push_back(evaluate_group(file.prompts, mixture, spec.threads, spec.output_space));
      }
    }
  }
  manifest.timings["evaluate"] = t.seconds();
  out.write("accuracy.csv", eval_table_text(rows));
  out.write("accuracy.svg",
            render_svg(accuracy_plot("In-context accuracy", rows, spec.k_values, spec.n_values)));
  manifest.summary["flatness"] = flatness_summary(rows, spec);
  out.finish();
  return manifest;
}

// -------------------------------------------------------------------- ablate

RunManifest cmd_ablate(const ExperimentSpec& spec) {
  spec.validate();
  RunManifest manifest = start_manifest(spec, "ablate");
  Artifacts out(spec.out_dir, manifest);
  const HmmMixture mixture = build_mixture(spec.ginc);
  const std::uint64_t base_seed = spec.resolved_prompt_seed();
  manifest.seeds["mixture"] = mixture_seed_table(spec.ginc);

  auto run = [&](const std::string& name, const HmmMixture& predictor, const HmmMixture& source,
                 std::uint64_t seed, const std::string& description) {
    Stopwatch t;
    const auto rows =
        run_eval_grid(predictor, source, spec, seed, spec.k_values, spec.n_values);
    manifest.timings[name] = t.seconds();
    manifest.seeds[name] = seed;
    out.write(name + ".csv", eval_table_text(rows));
    out.write(name + ".svg", render_svg(accuracy_plot(name, rows, spec.k_values, spec.n_values)));
    manifest.summary[name] = {{"description", description},
                              {"flatness", flatness_summary(rows, spec)}};
  };

  run("baseline", mixture, mixture, base_seed, "original family, prompts from the family");

  const bool all = spec.ablation == "all";
  if (all || spec.ablation == "single-concept") {
    const std::size_t kept = 0;
    const HmmMixture single = mixture.subset(std::span(&kept, 1));
    std::vector<std::size_t> others(mixture.n_concepts() - 1);
    std::iota(others.begin(), others.end(), std::size_t{1});
    if (!others.empty()) {
      run("single_concept_excluded", single, mixture.subset(others),
          derive_seed(base_seed, "ablate/single-excluded"),
          "predictor holds concept 0 only; prompts from the remaining concepts");
    }
    run("single_concept_included", single, single, derive_seed(base_seed, "ablate/single-included"),
        "predictor holds concept 0 only; prompts from concept 0");
  }
  if (all || spec.ablation == "random-transitions") {
    const HmmMixture fresh =
        mixture.with_concepts(build_fresh_concepts(spec.ginc, "random", spec.ginc.n_concepts));
    run("random_transitions", fresh, mixture, derive_seed(base_seed, "ablate/random"),
        "predictor family of freshly drawn random concepts; prompts from the original family");
  }
  if (all || spec.ablation == "unseen-concepts") {
    const HmmMixture unseen =
        mixture.with_concepts(build_fresh_concepts(spec.ginc, "unseen", spec.unseen_concepts));
    run("unseen_concepts", mixture, unseen, derive_seed(base_seed, "ablate/unseen"),
        "prompts from freshly drawn concepts outside the family; original predictor");
  }
  out.finish();
  return manifest;
}

// -------------------------------------------------------------- permutations

std::vector<PermutationRow> run_permutations(const HmmMixture& mixture, const ExperimentSpec& spec) {
  const PermutationSpec& ps = spec.permutation;
  const std::uint64_t seed = spec.resolved_prompt_seed();
  const std::size_t n_props = mixture.memory().n_properties();
  std::vector<PermutationRow> rows;

  for (std::size_t set = 0; set < ps.n_sets; ++set) {
    Rng rng(derive_seed(seed, "perm/set", {set}));
    const std::size_t concept_id = rng.categorical(mixture.prior());
    const std::size_t start_property = 1 + rng.uniform_index(n_props - 1);
    const Hmm& hmm = mixture.concept_hmm(concept_id);
    std::vector<std::vector<TokenId>> examples;
    for (std::size_t e = 0; e < ps.n_examples; ++e) {
      examples.push_back(sample_example(hmm, start_property, ps.k, rng));
    }
    std::vector<std::vector<TokenId>> tests(ps.n_tests);
    std::vector<TokenId> labels(ps.n_tests);
    parallel_for(ps.n_tests, spec.threads, [&](std::size_t t) {
      Rng test_rng(derive_seed(seed, "perm/test", {set, t}));
      tests[t] = sample_example(hmm, start_property, ps.k - 1, test_rng);
      labels[t] = compute_label(tests[t], hmm, start_property);
    });

    auto sorted = examples;
    std::sort(sorted.begin(), sorted.end());
    std::string multiset;
    for (const auto& ex : sorted) {
      for (TokenId tok : ex) multiset += mixture.vocabulary().token(tok) + " ";
      multiset += "|";
    }
    const std::string checksum = sha256_hex(multiset);

    std::vector<std::size_t> order(ps.n_examples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    do {
      std::vector<std::vector<TokenId>> ordered;
      for (std::size_t idx : order) ordered.push_back(examples[idx]);
      std::vector<unsigned char> correct(ps.n_tests, 0);
      parallel_for(ps.n_tests, spec.threads, [&](std::size_t t) {
        const auto flat = flatten_prompt(ordered, tests[t]);
        correct[t] = in_context_predict(flat, mixture, spec.output_space) == labels[t];
      });
      const std::size_t hits = std::accumulate(correct.begin(), correct.end(), std::size_t{0});
      PermutationRow row;
      row.set = set;
      for (std::size_t idx : order) row.permutation += std::to_string(idx);
      row.concept_id = concept_id;
      row.start_property = start_property;
      row.n_tests = ps.n_tests;
      row.accuracy = static_cast<double>(hits) / static_cast<double>(ps.n_tests);
      const Interval ci = wilson_interval(hits, ps.n_tests);
      row.ci_low = ci.low;
      row.ci_high = ci.high;
      row.examples_sha256 = checksum;
      rows.push_back(std::move(row));
    } while (std::next_permutation(order.begin(), order.end()));
  }
  return rows;
}

RunManifest cmd_permutations(const ExperimentSpec& spec) {
  spec.validate();
  RunManifest manifest = start_manifest(spec, "permutations");
  Artifacts out(spec.out_dir, manifest);
  const HmmMixture mixture = build_mixture(spec.ginc);
  manifest.seeds["mixture"] = mixture_seed_table(spec.ginc);
  manifest.seeds["sets"] = "derive_seed(prompt_seed, \"perm/set\", {set})";
  manifest.seeds["tests"] = "derive_seed(prompt_seed, \"perm/test\", {set, t})";
  manifest.seeds["prompt_seed"] = spec.resolved_prompt_seed();

  Stopwatch t;
  const auto rows = run_permutations(mixture, spec);
  manifest.timings["permutations"] = t.seconds();

  std::string table =
      "set,permutation,concept_id,start_property,n_tests,accuracy,ci_low,ci_high,examples_sha256\n";
  std::map<std::size_t, std::pair<double, double>> spread;
  for (const PermutationRow& r : rows) {
    table += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.set, r.permutation, r.concept_id,
                         r.start_property, r.n_tests, r.accuracy, r.ci_low, r.ci_high,
                         r.examples_sha256);
    auto [it, inserted] = spread.try_emplace(r.set, r.accuracy, r.accuracy);
    it->second.first = std::min(it->second.first, r.accuracy);
    it->second.second = std::max(it->second.second, r.accuracy);
  }
  out.write("permutations.csv", table);
  std::string spread_table = "set,min_accuracy,max_accuracy,spread\n";
  json spreads = json::array();
  for (const auto& [set, mm] : spread) {
    spread_table += fmt::format("{},{},{},{}\n", set, mm.first, mm.second, mm.second - mm.first);
    spreads.push_back(mm.second - mm.first);
  }
  out.write("permutation_spread.csv", spread_table);
  manifest.summary["rows"] = rows.size();
  manifest.summary["spread_per_set"] = spreads;
  out.finish();
  return manifest;
}

// --------------------------------------------------------------- zero-vs-few

RunManifest cmd_zero_vs_few(const ExperimentSpec& spec_in) {
  ExperimentSpec spec = spec_in;
  spec.ginc = zero_vs_few_config(spec.ginc);
  spec.k_values = {spec.zero_vs_few_k};
  if (spec.theta_star >= spec.ginc.n_concepts) spec.theta_star = 0;
  spec.validate();
  RunManifest manifest = start_manifest(spec, "zero-vs-few");
  Artifacts out(spec.out_dir, manifest);
  const HmmMixture mixture = build_mixture(spec.ginc);
  manifest.seeds["mixture"] = mixture_seed_table(spec.ginc);
  manifest.seeds["prompt_seed"] = spec.resolved_prompt_seed();

  Stopwatch t;
  const auto rows = run_eval_grid(mixture, mixture, spec, spec.resolved_prompt_seed(),
                                  spec.k_values, spec.n_values);
  manifest.timings["evaluate"] = t.seconds();
  out.write("zero_vs_few.csv", eval_table_text(rows));
  out.write("zero_vs_few.svg",
            render_svg(accuracy_plot("Low-temperature family", rows, spec.k_values, spec.n_values)));
  const double acc0 = accuracy_at(rows, spec.zero_vs_few_k, 0);
  const double acc1 = accuracy_at(rows, spec.zero_vs_few_k, 1);
  manifest.summary["config_echo"] = {{"concept_temperature", spec.ginc.concept_temperature},
                                     {"n_concepts", spec.ginc.n_concepts},
                                     {"vocab_size", spec.ginc.vocab_size}};
  manifest.summary["rows"] = rows.size();
  if (std::isfinite(acc0) && std::isfinite(acc1)) {
    manifest.summary["accuracy_n0"] = acc0;
    manifest.summary["accuracy_n1"] = acc1;
    manifest.summary["one_shot_below_zero_shot"] = acc1 < acc0;
  }
  out.finish();
  return manifest;
}

// -------------------------------------------------------------------- theory

TheoryReport build_theory_report(const HmmMixture& mixture, const ExperimentSpec& spec) {
  TheoryReport report;
  report.theta_star = spec.theta_star;
  report.k_values = spec.k_values;
  std::sort(report.k_values.begin(), report.k_values.end());
  const std::size_t max_k = report.k_values.back();
  const std::uint64_t seed = spec.resolved_prompt_seed();

  for (std::size_t k : report.k_values) {
    report.constants.push_back(estimate_constants(mixture, spec.theta_star, k));
  }
  report.eps = epsilon_terms(report.constants.front());
  report.eps_sup = report.eps.eps_start + report.eps.eps_delim;

  KlOptions options;
  options.n_samples = spec.kl_samples;
  options.seed = derive_seed(seed, "theory/kl");
  options.threads = spec.threads;
  report.kl_table = estimate_kl_table(mixture, spec.theta_star, max_k, options);
  report.kl_nonnegative = std::all_of(report.kl_table.begin(), report.kl_table.end(),
                                      [](const KlEstimate& e) {
                                        return e.mean >= -2.0 * e.std_error;
                                      });

  std::map<std::size_t, std::vector<double>> margins;  // theta -> margins in k order
  for (std::size_t k : report.k_values) {
    for (const auto& v : distinguishability_from_table(report.kl_table, report.eps, k)) {
      report.verdicts.push_back(v);
      margins[v.theta].push_back(v.margin);
    }
    report.bounds.push_back(thm3_bound(report.eps_sup, k));
  }
  report.margins_increase_in_k = true;
  for (const auto& [theta, m] : margins) {
    for (std::size_t i = 1; i < m.size(); ++i) {
      if (!(m[i] > m[i - 1])) report.margins_increase_in_k = false;
    }
  }

  const Hmm& star = mixture.concept_hmm(spec.theta_star);
  const std::size_t n_props = mixture.memory().n_properties();
  report.tv_samples.resize(spec.tv_samples);
  parallel_for(spec.tv_samples, spec.threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, "theory/tv", {i}));
    const std::size_t sp = 1 + rng.uniform_index(n_props - 1);
    const auto x_test = sample_example(star, sp, max_k - 1, rng);
    const auto start = prompt_start_distribution(mixture.memory(), sp);
    report.tv_samples[i] = {i, sp, tv_margin_check(mixture, spec.theta_star, start, x_test)};
  });

  const std::vector<std::size_t> star_only = {spec.theta_star};
  const HmmMixture star_source = mixture.subset(star_only);
  {
    PromptConfig pc = spec.prompt_config(max_k, spec.theory_n);
    pc.n_prompts = spec.theory_prompts;
    pc.vary_test_length = true;
    pc.seed = derive_seed(seed, "theory/varying");
    const auto prompts = sample_prompts(star_source, pc, spec.threads);
    report.varying_length = varying_length_eval(mixture, prompts, spec.threads);
  }
  if (spec.theory_n > 0) {
    PromptConfig pc = spec.prompt_config(max_k, spec.theory_n);
    pc.n_prompts = spec.theory_prompts;
    pc.seed = derive_seed(seed, "theory/rn");
    const auto prompts = sample_prompts(star_source, pc, spec.threads);
    std::vector<unsigned char> negative(prompts.size(), 1);
    parallel_for(prompts.size(), spec.threads, [&](std::size_t i) {
      for (std::size_t theta = 0; theta < mixture.n_concepts(); ++theta) {
        if (theta == spec.theta_star) continue;
        if (!(log_likelihood_ratio_rn(prompts[i].flat_tokens, mixture, theta, spec.theta_star) <
              0.0)) {
          negative[i] = 0;
        }
      }
    });
    report.rn_prompts = prompts.size();
    report.rn_all_negative_fraction =
        static_cast<double>(std::accumulate(negative.begin(), negative.end(), std::size_t{0})) /
        static_cast<double>(prompts.size());
  }
  return report;
}

namespace {

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json theory_report_to_json(const TheoryReport& r) {
  json constants = json::array();
  for (const ConstantsEstimate& c : r.constants) {
    const double c7_check = std::pow(c.c6, static_cast<double>(c.k)) * c.c5 * c.c5;
    constants.push_back({{"k", c.k},
                         {"c1", c.c1},
                         {"c2", c.c2},
                         {"c3", c.c3},
                         {"c4", c.c4},
                         {"c5", c.c5},
                         {"c6", c.c6},
                         {"c7", c.c7},
                         {"c8", c.c8},
                         {"c7_recomputed", c7_check},
                         {"c7_consistent", c7_check == c.c7}});
  }
  json verdicts = json::array();
  for (const auto& v : r.verdicts) {
    verdicts.push_back({{"k", v.k},
                        {"theta", v.theta},
                        {"kl_sum", finite_or_null(v.kl_sum)},
                        {"kl_sum_stderr", finite_or_null(v.kl_sum_stderr)},
                        {"margin", finite_or_null(v.margin)},
                        {"distinguishable", v.distinguishable}});
  }
  json bounds = json::array();
  for (std::size_t i = 0; i < r.bounds.size(); ++i) {
    bounds.push_back({{"k", r.k_values[i]},
                      {"value", finite_or_null(r.bounds[i].value)},
                      {"vacuous", r.bounds[i].vacuous}});
  }
  std::size_t tv_pass = 0;
  double tv_max = 0.0;
  for (const auto& s : r.tv_samples) {
    tv_pass += s.check.satisfied;
    tv_max = std::max(tv_max, s.check.tv_max);
  }
  json by_length = json::array();
  for (const auto& l : r.varying_length.by_length) {
    by_length.push_back({{"test_length", l.test_length},
                         {"n_prompts", l.n_prompts},
                         {"accuracy", l.accuracy}});
  }
  return {
      {"theta_star", r.theta_star},
      {"constants", constants},
      {"eps_start", finite_or_null(r.eps.eps_start)},
      {"eps_delim", finite_or_null(r.eps.eps_delim)},
      {"eps_finite", r.eps.finite},
      {"eps_sup", finite_or_null(r.eps_sup)},
      {"verdicts", verdicts},
      {"margins_increase_in_k", r.margins_increase_in_k},
      {"kl_nonnegative_within_2_stderr", r.kl_nonnegative},
      {"thm3_bound",
       {{"note", "g^-1(eps_sup / (k - 1)) with the O(.) constant set to 1; up to a constant"},
        {"values", bounds}}},
      {"tv_margin",
       {{"samples", r.tv_samples.size()}, {"satisfied", tv_pass}, {"tv_max", tv_max}}},
      {"varying_length",
       {{"aggregate_accuracy", r.varying_length.aggregate.accuracy},
        {"aggregate_n_prompts", r.varying_length.aggregate.n_prompts},
        {"by_length", by_length}}},
      {"rn_prompts", r.rn_prompts},
      {"rn_all_negative_fraction", r.rn_all_negative_fraction},
  };
}

RunManifest cmd_theory(const ExperimentSpec& spec) {
  spec.validate();
  RunManifest manifest = start_manifest(spec, "theory");
  Artifacts out(spec.out_dir, manifest);
  const HmmMixture mixture = build_mixture(spec.ginc);
  const std::uint64_t seed = spec.resolved_prompt_seed();
  manifest.seeds["mixture"] = mixture_seed_table(spec.ginc);
  manifest.seeds["kl"] = derive_seed(seed, "theory/kl");
  manifest.seeds["varying_length"] = derive_seed(seed, "theory/varying");
  manifest.seeds["rn"] = derive_seed(seed, "theory/rn");
  manifest.seeds["tv"] = "derive_seed(prompt_seed, \"theory/tv\", {i})";

  Stopwatch t;
  const TheoryReport report = build_theory_report(mixture, spec);
  manifest.timings["report"] = t.seconds();

  out.write("theory_report.json", theory_report_to_json(report).dump(2) + "\n");

  std::string kl = "theta,j,estimate,stderr,n_samples,n_infinite\n";
  for (const KlEstimate& e : report.kl_table) {
    kl += fmt::format("{},{},{},{},{},{}\n", e.theta, e.j, e.mean, e.std_error, e.n_samples,
                      e.n_infinite);
  }
  out.write("kl_table.csv", kl);

  std::string margins = "k,theta,kl_sum,kl_sum_stderr,eps_start,eps_delim,margin,distinguishable\n";
  for (const auto& v : report.verdicts) {
    margins += fmt::format("{},{},{},{},{},{},{},{}\n", v.k, v.theta, v.kl_sum, v.kl_sum_stderr,
                           v.eps_start, v.eps_delim, v.margin, v.distinguishable ? 1 : 0);
  }
  out.write("margins.csv", margins);

  std::string tv = "sample,start_property,tv_max,delta_margin,satisfied\n";
  for (const auto& s : report.tv_samples) {
    tv += fmt::format("{},{},{},{},{}\n", s.index, s.start_property, s.check.tv_max,
                      s.check.delta_margin, s.check.satisfied ? 1 : 0);
  }
  out.write("tv_margin.csv", tv);

  std::string lengths = "test_length,n_prompts,accuracy,ci_low,ci_high\n";
  for (const auto& l : report.varying_length.by_length) {
    lengths += fmt::format("{},{},{},{},{}\n", l.test_length, l.n_prompts, l.accuracy, l.ci_low,
                           l.ci_high);
  }
  const auto& agg = report.varying_length.aggregate;
  lengths += fmt::format("all,{},{},{},{}\n", agg.n_prompts, agg.accuracy, agg.ci_low, agg.ci_high);
  out.write("varying_length.csv", lengths);

  LinePlot plot;
  plot.title = "Distinguishability margin";
  plot.x_label = "example length k";
  plot.y_label = "margin";
  for (std::size_t k : report.k_values) plot.x_ticks.push_back(std::to_string(k));
  std::map<std::size_t, PlotSeries> series;
  double lo = 0.0;
  double hi = 0.0;
  for (const auto& v : report.verdicts) {
    auto& s = series[v.theta];
    s.label = fmt::format("theta = {}", v.theta);
    s.y.push_back(v.margin);
    if (std::isfinite(v.margin)) {
      lo = std::min(lo, v.margin);
      hi = std::max(hi, v.margin);
    }
  }
  for (auto& [theta, s] : series) plot.series.push_back(std::move(s));
  plot.y_min = std::floor(lo);
  plot.y_max = std::ceil(hi) > plot.y_min ? std::ceil(hi) : plot.y_min + 1.0;
  out.write("margins.svg", render_svg(plot));

  manifest.summary["margins_increase_in_k"] = report.margins_increase_in_k;
  manifest.summary["kl_nonnegative_within_2_stderr"] = report.kl_nonnegative;
  manifest.summary["rn_all_negative_fraction"] = report.rn_all_negative_fraction;
  out.finish();
  return manifest;
}

RunManifest run_command(const ExperimentSpec& spec) {
  if (spec.command == "gen-corpus") return cmd_gen_corpus(spec);
  if (spec.command == "gen-prompts") return cmd_gen_prompts(spec);
  if (spec.command == "eval") return cmd_eval(spec);
  if (spec.command == "ablate") return cmd_ablate(spec);
  if (spec.command == "permutations") return cmd_permutations(spec);
  if (spec.command == "zero-vs-few") return cmd_zero_vs_few(spec);
  if (spec.command == "theory") return cmd_theory(spec);
  throw InvalidConfiguration(fmt::format("unknown command '{}'", spec.command));
}

}  // namespace ginc
