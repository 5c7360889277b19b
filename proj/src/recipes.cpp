#include "kgdial/recipes.hpp"

#include "kgdial/errors.hpp"
#include "kgdial/text.hpp"

namespace kgdial {

DataSplits DataSplits::load(const std::filesystem::path& dir) {
  DataSplits d;
  d.graph = KnowledgeGraph::load(dir / "graph.json");
  d.train = load_corpus(dir / "train.json");
  if (std::filesystem::exists(dir / "dev.json")) d.dev = load_corpus(dir / "dev.json");
  if (std::filesystem::exists(dir / "test.json")) d.test = load_corpus(dir / "test.json");
  return d;
}

nlohmann::json load_config(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::json config_section(const nlohmann::json& config, const char* section) {
  if (config.is_object() && config.contains(section)) return config.at(section);
  return nlohmann::json::object();
}

Tokenizer build_tokenizer(const Corpus& train, const KnowledgeGraph& graph) {
  const auto texts = vocabulary_texts(train, graph);
  return Tokenizer::build(texts, 1);
}

nn::ModelConfig model_config(const nlohmann::json& section, const Tokenizer& tok) {
  auto cfg = nn::ModelConfig::from_json(section.value("model", nlohmann::json::object()));
  cfg.vocab_size = static_cast<int>(tok.size());
  cfg.validate();
  return cfg;
}

nn::TrainConfig train_config(const nlohmann::json& section) {
  return nn::TrainConfig::from_json(section.value("train", nlohmann::json::object()));
}

TopicModel make_topic_model(const nlohmann::json& section, const Tokenizer& tok,
                            const KnowledgeGraph& graph) {
  const auto cfg = model_config(section, tok);
  return TopicModel(cfg, graph.topics(), section.value("seed", std::uint64_t{11}),
                    section.value("max_len", std::size_t{400}));
}

Matcher make_matcher(const nlohmann::json& section, MatcherVariant variant, const Tokenizer& tok) {
  const auto cfg = model_config(section, tok);
  return Matcher(cfg, variant, section.value("seed", std::uint64_t{12}),
                 section.value("max_len", std::size_t{400}),
                 section.value("knowledge_max_len", std::size_t{64}),
                 section.value("pair_max_len", std::size_t{500}));
}

GeneratorConfig generator_config(const nlohmann::json& section, const Tokenizer& tok,
                                 std::optional<GenArch> arch, std::optional<int> kb,
                                 std::optional<bool> nsp, std::optional<bool> share) {
  GeneratorConfig g;
  g.model = model_config(section, tok);
  g.arch = parse_gen_arch(section.value("arch", std::string("encdec")));
  g.share_embeddings = section.value("share", false);
  g.nsp = section.value("nsp", true);
  g.knowledge_count = section.value("kb", 1);
  g.allow_any_m = section.value("allow_any_m", false);
  g.max_len = section.value("max_len", std::size_t{400});
  g.max_reply_len = section.value("max_reply_len", std::size_t{64});
  if (arch) g.arch = *arch;
  if (kb) g.knowledge_count = *kb;
  if (nsp) g.nsp = *nsp;
  if (share) g.share_embeddings = *share;
  g.validate();
  return g;
}

Generator make_generator(const GeneratorConfig& cfg, const nlohmann::json& section) {
  return Generator(cfg, section.value("seed", std::uint64_t{13}));
}

}  // namespace kgdial
