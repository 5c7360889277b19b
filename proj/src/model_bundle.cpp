#include "kgdial/model_bundle.hpp"

#include <json.hpp>

#include "kgdial/errors.hpp"
#include "kgdial/text.hpp"

namespace kgdial {

void ModelBundle::build_recall() {
  if (!graph) throw ConfigError("model bundle has no knowledge graph");
  recall.clear();
  for (auto algo : {RecallAlgorithm::kTfidf, RecallAlgorithm::kLexical, RecallAlgorithm::kAhoCorasick})
    recall.emplace(algo, RecallIndex::build(*graph, algo, recall_documents));
}

const RecallIndex& ModelBundle::index(RecallAlgorithm algo) const {
  auto it = recall.find(algo);
  if (it == recall.end())
    throw ConfigError("no recall index for '" + std::string(to_string(algo)) + "'");
  return it->second;
}

void ModelBundle::require_complete() const {
  if (!graph) throw ConfigError("missing knowledge graph");
  if (tokenizer.size() == 0) throw ConfigError("missing tokenizer");
  if (recall.empty()) throw ConfigError("missing recall indexes");
  if (!topic) throw ConfigError("missing topic model");
  if (!matcher) throw ConfigError("missing matcher model");
  if (!generator) throw ConfigError("missing generator model");
  if (topic->topics() != graph->topics())
    throw ConfigError("topic model was trained on a different topic list than the graph");
}

void ModelBundle::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  tokenizer.save(dir / "vocab.json");
  write_file(dir / "recall_documents.json", nlohmann::json(recall_documents).dump());
  if (topic) topic->save(dir / "topic.ckpt");
  if (matcher) matcher->save(dir / "matcher.ckpt");
  if (generator) generator->save(dir / "generator.ckpt");
}

ModelBundle ModelBundle::load(const std::filesystem::path& graph_path,
                              const std::filesystem::path& dir) {
  ModelBundle b;
  b.graph = std::make_shared<const KnowledgeGraph>(KnowledgeGraph::load(graph_path));
  auto need = [&](const char* name) {
    const auto p = dir / name;
    if (!std::filesystem::exists(p)) throw ConfigError("missing model file " + p.string());
    return p;
  };
  b.tokenizer = Tokenizer::load(need("vocab.json"));
  const auto docs = dir / "recall_documents.json";
  if (std::filesystem::exists(docs))
    b.recall_documents = nlohmann::json::parse(read_file(docs)).get<std::vector<std::string>>();
  b.topic = std::make_shared<TopicModel>(TopicModel::load(need("topic.ckpt")));
  b.matcher = std::make_shared<Matcher>(Matcher::load(need("matcher.ckpt")));
  b.generator = std::make_shared<Generator>(Generator::load(need("generator.ckpt")));
  b.build_recall();
  b.require_complete();
  return b;
}

}  // namespace kgdial
