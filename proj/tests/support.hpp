#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "kgdial/corpus.hpp"
#include "kgdial/kg_store.hpp"
#include "kgdial/nn/layers.hpp"
#include "kgdial/tokenizer.hpp"

namespace kgtest {

inline std::filesystem::path fixtures_dir() { return KGDIAL_TEST_FIXTURES; }
inline std::filesystem::path data_dir() { return KGDIAL_DATA_DIR; }
inline std::filesystem::path synthetic_dir() { return data_dir() / "synthetic"; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kgdial_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline kgdial::KnowledgeTriple triple(std::string h, std::string r, std::string t) {
  return {std::move(h), std::move(r), std::move(t)};
}

/// Three films with a related-film chain Alpha -> Beta -> Gamma.
inline kgdial::KnowledgeGraph film_graph() {
  using kgdial::TopicRecord;
  std::vector<TopicRecord> records{
      {"Alpha",
       {triple("Alpha", "director", "Ann Lee"), triple("Alpha", "genre", "drama"),
        triple("Alpha", "related", "Beta")}},
      {"Beta",
       {triple("Beta", "director", "Bo Chan"), triple("Beta", "genre", "comedy"),
        triple("Beta", "related", "Gamma")}},
      {"Gamma", {triple("Gamma", "director", "Cy Diaz"), triple("Gamma", "genre", "drama")}},
  };
  return kgdial::KnowledgeGraph::from_records(std::move(records));
}

inline kgdial::Message msg(std::string text, std::vector<kgdial::KnowledgeTriple> attrs = {}) {
  return {std::move(text), std::move(attrs)};
}

/// Two short dialogues over film_graph().
inline kgdial::Corpus film_corpus() {
  kgdial::Corpus c;
  c.push_back({{msg("who directed Alpha ?"),
                msg("Alpha was directed by Ann Lee .", {triple("Alpha", "director", "Ann Lee")}),
                msg("what genre is it ?"),
                msg("Alpha is a drama .", {triple("Alpha", "genre", "drama")})},
               "d0"});
  c.push_back({{msg("tell me about Beta"),
                msg("Beta is a comedy .", {triple("Beta", "genre", "comedy")}),
                msg("who directed it ?"),
                msg("Beta was directed by Bo Chan .", {triple("Beta", "director", "Bo Chan")})},
               "d1"});
  return c;
}

inline kgdial::Tokenizer film_tokenizer() {
  auto texts = kgdial::vocabulary_texts(film_corpus(), film_graph());
  return kgdial::Tokenizer::build(texts);
}

inline kgdial::nn::ModelConfig tiny_model(int vocab, int layers = 1) {
  kgdial::nn::ModelConfig cfg;
  cfg.vocab_size = vocab;
  cfg.hidden = 16;
  cfg.layers = layers;
  cfg.heads = 2;
  cfg.ffn = 32;
  cfg.max_positions = 96;
  return cfg;
}

inline std::vector<int> random_ids(std::mt19937_64& rng, std::size_t n, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi - 1);
  std::vector<int> out(n);
  for (auto& x : out) x = d(rng);
  return out;
}

}  // namespace kgtest
