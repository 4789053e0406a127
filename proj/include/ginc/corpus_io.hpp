#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ginc/generator.hpp"

namespace ginc {

struct Corpus {
  Vocabulary vocabulary = Vocabulary::build(2);
  GincConfig config;
  std::vector<Document> documents;
};

// One document per line, tokens joined by single spaces, delimiter rendered
// as "\". Lines end with '\n'; an empty corpus is an empty file.
void write_corpus_text(std::ostream& out, const std::vector<Document>& documents,
                       const Vocabulary& vocab);

// Token sequences of a corpus text stream. Throws ParseError carrying the
// 1-based line number on unknown tokens, empty lines or doubled spaces.
std::vector<std::vector<TokenId>> read_corpus_text(std::istream& in, const Vocabulary& vocab);

// Sidecar path for a corpus file: "train.txt" -> "train.meta.json".
std::filesystem::path corpus_meta_path(const std::filesystem::path& corpus_path);

// Writes the text file and its JSON sidecar (config, per-document concept
// ids, vocabulary in index order), each atomically.
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

Corpus read_corpus(const std::filesystem::path& path);

}  // namespace ginc
