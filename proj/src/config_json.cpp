#include "ginc/config_json.hpp"

#include <set>
#include <string>

#include <fmt/format.h>

#include "ginc/errors.hpp"

namespace ginc {

void to_json(nlohmann::json& j, const GincConfig& c) {
  j = nlohmann::json{
      {"vocab_size", c.vocab_size},
      {"n_entities", c.n_entities},
      {"n_properties", c.n_properties},
      {"n_concepts", c.n_concepts},
      {"perm_count", c.perm_count},
      {"concept_temperature", c.concept_temperature},
      {"start_temperature", c.start_temperature},
      {"entity_self_loop", c.entity_self_loop},
      {"n_train_docs", c.n_train_docs},
      {"n_val_docs", c.n_val_docs},
      {"train_doc_len", c.train_doc_len},
      {"val_doc_len", c.val_doc_len},
      {"master_seed", c.master_seed},
  };
}

void from_json(const nlohmann::json& j, GincConfig& c) {
  static const std::set<std::string> known = {
      "vocab_size",       "n_entities",        "n_properties", "n_concepts",   "perm_count",
      "concept_temperature", "start_temperature", "entity_self_loop", "n_train_docs",
      "n_val_docs",       "train_doc_len",     "val_doc_len",  "master_seed"};
  if (!j.is_object()) throw InvalidConfiguration("GincConfig must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InvalidConfiguration(fmt::format("unknown GincConfig key '{}'", key));
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("vocab_size", c.vocab_size);
    get("n_entities", c.n_entities);
    get("n_properties", c.n_properties);
    get("n_concepts", c.n_concepts);
    get("perm_count", c.perm_count);
    get("concept_temperature", c.concept_temperature);
    get("start_temperature", c.start_temperature);
    get("entity_self_loop", c.entity_self_loop);
    get("n_train_docs", c.n_train_docs);
    get("n_val_docs", c.n_val_docs);
    get("train_doc_len", c.train_doc_len);
    get("val_doc_len", c.val_doc_len);
    get("master_seed", c.master_seed);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfiguration(fmt::format("bad GincConfig value: {}", e.what()));
  }
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

nlohmann::json mixture_to_json(const HmmMixture& mixture) {
  const MemoryMatrix& memory = mixture.memory();
  nlohmann::json mem = nlohmann::json::array();
  for (std::size_t v = 0; v < memory.n_entities(); ++v) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t s = 0; s < memory.n_properties(); ++s) {
      row.push_back(mixture.vocabulary().token(memory.at({v, s})));
    }
    mem.push_back(row);
  }
  nlohmann::json concepts = nlohmann::json::array();
  for (std::size_t c = 0; c < mixture.n_concepts(); ++c) {
    concepts.push_back({
        {"property_transition", matrix_to_json(mixture.concept_params(c).property_transition)},
        {"start_distribution", mixture.concept_params(c).start_distribution},
    });
  }
  return {
      {"vocabulary", mixture.vocabulary().tokens()},
      {"memory", mem},
      {"entity_transition", matrix_to_json(mixture.entity().entity_transition)},
      {"concepts", concepts},
      {"prior", mixture.prior()},
  };
}

}  // namespace ginc
