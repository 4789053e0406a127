#include "ginc/corpus_io.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ginc/config_json.hpp"
#include "ginc/errors.hpp"
#include "ginc/file_util.hpp"

namespace ginc {

namespace {

std::string render(const std::vector<Document>& documents, const Vocabulary& vocab) {
  std::string text;
  for (const Document& doc : documents) {
    for (std::size_t t = 0; t < doc.tokens.size(); ++t) {
      if (t > 0) text.push_back(' ');
      text += vocab.token(doc.tokens[t]);
    }
    text.push_back('\n');
  }
  return text;
}

std::vector<TokenId> parse_line(std::string_view line, const Vocabulary& vocab,
                                std::size_t line_no) {
  if (line.empty()) throw ParseError("empty document line", line_no);
  std::vector<TokenId> tokens;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = line.find(' ', pos);
    const std::string_view word = line.substr(pos, end == std::string_view::npos ? end : end - pos);
    if (word.empty()) throw ParseError("tokens must be separated by single spaces", line_no);
    const auto id = vocab.find(word);
    if (!id) throw ParseError(fmt::format("unknown token '{}'", word), line_no);
    tokens.push_back(*id);
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return tokens;
}

}  // namespace

void write_corpus_text(std::ostream& out, const std::vector<Document>& documents,
                       const Vocabulary& vocab) {
  out << render(documents, vocab);
}

std::vector<std::vector<TokenId>> read_corpus_text(std::istream& in, const Vocabulary& vocab) {
  std::vector<std::vector<TokenId>> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    docs.push_back(parse_line(line, vocab, line_no));
  }
  return docs;
}

std::filesystem::path corpus_meta_path(const std::filesystem::path& corpus_path) {
  std::filesystem::path meta = corpus_path;
  meta.replace_extension(".meta.json");
  return meta;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  write_file_atomic(path, render(corpus.documents, corpus.vocabulary));
  std::vector<std::size_t> concept_ids;
  std::size_t n_tokens = 0;
  for (const Document& d : corpus.documents) {
    concept_ids.push_back(d.concept_id);
    n_tokens += d.tokens.size();
  }
  nlohmann::json meta = {
      {"format", "ginc-corpus"},
      {"version", 1},
      {"config", corpus.config},
      {"n_documents", corpus.documents.size()},
      {"n_tokens", n_tokens},
      {"concept_ids", concept_ids},
      {"vocabulary", corpus.vocabulary.tokens()},
  };
  write_file_atomic(corpus_meta_path(path), meta.dump(1) + "\n");
}

Corpus read_corpus(const std::filesystem::path& path) {
  const std::filesystem::path meta_path = corpus_meta_path(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("{}: {}", meta_path.string(), e.what()), 0);
  }
  Corpus corpus;
  try {
    corpus.vocabulary = Vocabulary::from_tokens(meta.at("vocabulary").get<std::vector<std::string>>());
    corpus.config = meta.at("config").get<GincConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("{}: {}", meta_path.string(), e.what()), 0);
  }
  const auto concept_ids = meta.at("concept_ids").get<std::vector<std::size_t>>();

  std::istringstream text(read_file(path));
  auto token_lists = read_corpus_text(text, corpus.vocabulary);
  if (token_lists.size() != concept_ids.size()) {
    throw ParseError(fmt::format("{} holds {} documents but its metadata lists {}", path.string(),
                                 token_lists.size(), concept_ids.size()),
                     token_lists.size());
  }
  corpus.documents.resize(token_lists.size());
  for (std::size_t i = 0; i < token_lists.size(); ++i) {
    corpus.documents[i].concept_id = concept_ids[i];
    corpus.documents[i].tokens = std::move(token_lists[i]);
  }
  return corpus;
}

}  // namespace ginc
