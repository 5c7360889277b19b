#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "kgdial/corpus.hpp"
#include "kgdial/generator.hpp"
#include "kgdial/kg_store.hpp"
#include "kgdial/matcher.hpp"
#include "kgdial/nn/optim.hpp"
#include "kgdial/pipeline.hpp"
#include "kgdial/tokenizer.hpp"
#include "kgdial/topic_model.hpp"

namespace kgdial {

/// A data directory: graph.json plus train/dev/test dialogue files (dev and
/// test optional).
struct DataSplits {
  KnowledgeGraph graph;
  Corpus train, dev, test;

  static DataSplits load(const std::filesystem::path& dir);
};

/// Training config file: {"topic": {...}, "matcher": {...}, "generator":
/// {...}, "pipeline": {...}}, each model section holding "model", "train"
/// and model-specific keys.
nlohmann::json load_config(const std::filesystem::path& path);
/// `section` of the config, or an empty object.
nlohmann::json config_section(const nlohmann::json& config, const char* section);

Tokenizer build_tokenizer(const Corpus& train, const KnowledgeGraph& graph);

nn::ModelConfig model_config(const nlohmann::json& section, const Tokenizer& tok);
nn::TrainConfig train_config(const nlohmann::json& section);

TopicModel make_topic_model(const nlohmann::json& section, const Tokenizer& tok,
                            const KnowledgeGraph& graph);
Matcher make_matcher(const nlohmann::json& section, MatcherVariant variant, const Tokenizer& tok);
/// Section values, overridden by any flag that is set.
GeneratorConfig generator_config(const nlohmann::json& section, const Tokenizer& tok,
                                 std::optional<GenArch> arch = {}, std::optional<int> kb = {},
                                 std::optional<bool> nsp = {}, std::optional<bool> share = {});
Generator make_generator(const GeneratorConfig& cfg, const nlohmann::json& section);

}  // namespace kgdial
