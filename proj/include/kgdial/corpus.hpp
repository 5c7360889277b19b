#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kgdial/kg_store.hpp"

namespace kgdial {

struct Message {
  std::string text;
  /// Knowledge the message is grounded on (KdConv "attrs").
  std::vector<KnowledgeTriple> attrs;
};

struct Dialogue {
  std::vector<Message> messages;
  std::string name;
};

using Corpus = std::vector<Dialogue>;

/// KdConv-compatible dialogue JSON:
/// `[{ "messages": [{ "message": s, "attrs": [{"name","attrname","attrvalue"}]? }] }]`.
Corpus parse_corpus(std::string_view text);
Corpus load_corpus(const std::filesystem::path& path);
nlohmann::json corpus_to_json(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// One text per dialogue (all messages joined by newlines).
std::vector<std::string> dialogue_documents(const Corpus& corpus);

/// Every message text plus every triple rendering; the vocabulary source.
std::vector<std::string> vocabulary_texts(const Corpus& corpus, const KnowledgeGraph& graph);

}  // namespace kgdial
