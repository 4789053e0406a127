#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ginc/prompt.hpp"

namespace ginc {

// Prompt file layout (UTF-8, '\n' line ends):
//
//   # ginc-prompts 1
//   # vocab \ a b c ...
//   # index<TAB>seed<TAB>k<TAB>n<TAB>concept_id<TAB>start_property<TAB>examples<TAB>x_test<TAB>y_test
//   <one record per line, tab-separated in the order above>
//
// `examples` holds the n training examples, tokens separated by single
// spaces and examples separated by " | " (empty when n = 0). Delimiters are
// not written; flat_tokens is rebuilt on read.
struct PromptFile {
  Vocabulary vocabulary = Vocabulary::build(2);
  std::vector<Prompt> prompts;
};

void write_prompts(std::ostream& out, const std::vector<Prompt>& prompts, const Vocabulary& vocab);
void write_prompts(const std::filesystem::path& path, const std::vector<Prompt>& prompts,
                   const Vocabulary& vocab);

// ParseError locations are 0-based record indices.
PromptFile read_prompts(std::istream& in);
PromptFile read_prompts(const std::filesystem::path& path);

}  // namespace ginc
