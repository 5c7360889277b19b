#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kgdial/generator.hpp"
#include "kgdial/kg_store.hpp"
#include "kgdial/matcher.hpp"
#include "kgdial/recall.hpp"
#include "kgdial/tokenizer.hpp"
#include "kgdial/topic_model.hpp"

namespace kgdial {

/// Everything the pipeline needs at inference time. A checkpoint directory
/// holds vocab.json, topic.ckpt, matcher.ckpt, generator.ckpt and
/// recall_documents.json (the tf-idf document set).
struct ModelBundle {
  std::shared_ptr<const KnowledgeGraph> graph;
  Tokenizer tokenizer;
  std::vector<std::string> recall_documents;
  std::map<RecallAlgorithm, RecallIndex> recall;
  std::shared_ptr<TopicModel> topic;
  std::shared_ptr<Matcher> matcher;
  std::shared_ptr<Generator> generator;

  /// Builds an index for every recall algorithm over graph topics.
  void build_recall();
  const RecallIndex& index(RecallAlgorithm algo) const;
  /// Throws ConfigError naming the first missing component.
  void require_complete() const;

  void save(const std::filesystem::path& dir) const;
  /// Missing model files raise ConfigError.
  static ModelBundle load(const std::filesystem::path& graph_path, const std::filesystem::path& dir);
};

}  // namespace kgdial
