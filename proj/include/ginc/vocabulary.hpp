#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ginc {

using TokenId = std::uint32_t;

inline constexpr TokenId kDelimiterIndex = 0;
inline constexpr std::string_view kDelimiterToken = "\\";

// Ordered token list. Index 0 is the backslash delimiter; the remaining
// tokens are "a".."z", "aa".."az", "ba".. in order.
class Vocabulary {
 public:
  static Vocabulary build(std::size_t size);

  // Accepts a token list read back from disk; it must be exactly the list
  // `build(tokens.size())` would produce.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId delimiter_index() const noexcept { return kDelimiterIndex; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::optional<TokenId> find(std::string_view token) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  explicit Vocabulary(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> lookup_;
};

// Name of the i-th non-delimiter token, 1-based: 1 -> "a", 27 -> "aa".
std::string letter_token(std::size_t ordinal);

inline Vocabulary build_vocabulary(std::size_t size) { return Vocabulary::build(size); }

}  // namespace ginc
