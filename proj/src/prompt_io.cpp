#include "ginc/prompt_io.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "ginc/errors.hpp"
#include "ginc/file_util.hpp"

namespace ginc {

namespace {

constexpr std::string_view kMagic = "# ginc-prompts 1";
constexpr std::string_view kVocabPrefix = "# vocab ";
constexpr std::string_view kFieldLine =
    "# index\tseed\tk\tn\tconcept_id\tstart_property\texamples\tx_test\ty_test";
constexpr std::string_view kExampleSep = " | ";

std::string join_tokens(std::span<const TokenId> tokens, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += vocab.token(tokens[i]);
  }
  return out;
}

std::vector<std::string_view> split(std::string_view text, std::string_view sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = text.find(sep, pos);
    if (end == std::string_view::npos) {
      parts.push_back(text.substr(pos));
      return parts;
    }
    parts.push_back(text.substr(pos, end - pos));
    pos = end + sep.size();
  }
}

std::vector<TokenId> parse_tokens(std::string_view text, const Vocabulary& vocab,
                                  std::size_t record) {
  std::vector<TokenId> out;
  if (text.empty()) return out;
  for (std::string_view word : split(text, " ")) {
    const auto id = vocab.find(word);
    if (!id) throw ParseError(fmt::format("record {}: unknown token '{}'", record, word), record);
    out.push_back(*id);
  }
  return out;
}

std::uint64_t parse_uint(std::string_view text, std::size_t record, const char* field) {
  try {
    std::size_t used = 0;
    const std::string s(text);
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size() || s.empty() || s.front() == '-') throw std::invalid_argument(field);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError(fmt::format("record {}: bad {} '{}'", record, field, text), record);
  }
}

}  // namespace

void write_prompts(std::ostream& out, const std::vector<Prompt>& prompts, const Vocabulary& vocab) {
  out << kMagic << '\n' << kVocabPrefix << join_tokens([&] {
    std::vector<TokenId> all(vocab.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<TokenId>(i);
    return all;
  }(), vocab) << '\n' << kFieldLine << '\n';
  for (const Prompt& p : prompts) {
    std::string examples;
    for (std::size_t i = 0; i < p.examples.size(); ++i) {
      if (i > 0) examples += kExampleSep;
      examples += join_tokens(p.examples[i], vocab);
    }
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", p.index, p.seed, p.k, p.n(),
                       p.concept_id, p.start_property, examples, join_tokens(p.x_test, vocab),
                       vocab.token(p.y_test));
  }
}

void write_prompts(const std::filesystem::path& path, const std::vector<Prompt>& prompts,
                   const Vocabulary& vocab) {
  std::ostringstream out;
  write_prompts(out, prompts, vocab);
  write_file_atomic(path, out.str());
}

PromptFile read_prompts(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw ParseError("missing prompt file header", 0);
  if (!std::getline(in, line) || !line.starts_with(kVocabPrefix)) {
    throw ParseError("missing vocabulary line", 0);
  }
  PromptFile file;
  {
    std::vector<std::string> tokens;
    for (std::string_view w : split(std::string_view(line).substr(kVocabPrefix.size()), " ")) {
      tokens.emplace_back(w);
    }
    try {
      file.vocabulary = Vocabulary::from_tokens(std::move(tokens));
    } catch (const InvalidConfiguration& e) {
      throw ParseError(e.what(), 0);
    }
  }
  if (!std::getline(in, line) || line != kFieldLine) throw ParseError("missing field line", 0);

  const Vocabulary& vocab = file.vocabulary;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    const auto fields = split(line, "\t");
    if (fields.size() != 9) {
      throw ParseError(fmt::format("record {}: expected 9 fields, found {}", record, fields.size()),
                       record);
    }
    Prompt p;
    p.index = parse_uint(fields[0], record, "index");
    p.seed = parse_uint(fields[1], record, "seed");
    p.k = parse_uint(fields[2], record, "k");
    const std::size_t n = parse_uint(fields[3], record, "n");
    p.concept_id = parse_uint(fields[4], record, "concept_id");
    p.start_property = parse_uint(fields[5], record, "start_property");
    if (n > 0) {
      for (std::string_view ex : split(fields[6], kExampleSep)) {
        p.examples.push_back(parse_tokens(ex, vocab, record));
        if (p.examples.back().size() != p.k) {
          throw ParseError(fmt::format("record {}: example length differs from k", record), record);
        }
      }
    } else if (!fields[6].empty()) {
      throw ParseError(fmt::format("record {}: examples present with n = 0", record), record);
    }
    if (p.examples.size() != n) {
      throw ParseError(fmt::format("record {}: n = {} but {} examples", record, n, p.examples.size()),
                       record);
    }
    p.x_test = parse_tokens(fields[7], vocab, record);
    const auto y = parse_tokens(fields[8], vocab, record);
    if (y.size() != 1) throw ParseError(fmt::format("record {}: y_test must be one token", record), record);
    p.y_test = y.front();
    p.flat_tokens = flatten_prompt(p.examples, p.x_test);
    file.prompts.push_back(std::move(p));
    ++record;
  }
  return file;
}

PromptFile read_prompts(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return read_prompts(in);
}

}  // namespace ginc
