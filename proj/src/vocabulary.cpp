#include "ginc/vocabulary.hpp"

#include <algorithm>

#include "ginc/errors.hpp"

namespace ginc {

std::string letter_token(std::size_t ordinal) {
  // Bijective base 26.
  std::string out;
  while (ordinal > 0) {
    --ordinal;
    out.push_back(static_cast<char>('a' + ordinal % 26));
    ordinal /= 26;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  lookup_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    lookup_.emplace(tokens_[i], static_cast<TokenId>(i));
  }
}

Vocabulary Vocabulary::build(std::size_t size) {
  if (size < 2) throw InvalidConfiguration("vocabulary size must be at least 2");
  std::vector<std::string> tokens;
  tokens.reserve(size);
  tokens.emplace_back(kDelimiterToken);
  for (std::size_t i = 1; i < size; ++i) tokens.push_back(letter_token(i));
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  const Vocabulary expected = build(tokens.size());
  if (expected.tokens_ != tokens) {
    throw InvalidConfiguration("token list does not follow the delimiter + a..z, aa.. layout");
  }
  return expected;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = lookup_.find(std::string(token));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

}  // namespace ginc
