#pragma once

#include <nlohmann/json.hpp>

#include "ginc/generator.hpp"
#include "ginc/prompt.hpp"

namespace ginc {

// Keys mirror the GincConfig field names exactly. Missing keys keep their
// defaults; unknown keys are rejected.
void to_json(nlohmann::json& j, const GincConfig& config);
void from_json(const nlohmann::json& j, GincConfig& config);

nlohmann::json matrix_to_json(const Matrix& m);

// Mixture parameters (vocabulary, memory, entity and property matrices,
// start distributions, prior) for consumption by external tools.
nlohmann::json mixture_to_json(const HmmMixture& mixture);

}  // namespace ginc
