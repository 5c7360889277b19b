#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "kgdial/corpus.hpp"
#include "kgdial/kg_store.hpp"

namespace kgdial {

struct SyntheticOptions {
  std::uint64_t seed = 7;
  std::size_t train_dialogues = 200;
  std::size_t dev_dialogues = 40;
  std::size_t test_dialogues = 40;
  /// Probability that a dialogue moves to a second topic midway.
  double switch_probability = 0.3;
  /// Probability that a follow-up question says "it" instead of the title.
  double pronoun_probability = 0.35;
};

/// A film-domain toy benchmark: 20 topics (including names that contain
/// other names, such as "Inception" and "Inception 2"), one triple per
/// relation, and KdConv-shaped dialogues whose bot turns are annotated with
/// the triple they verbalize.
struct SyntheticCorpus {
  KnowledgeGraph graph;
  Corpus train, dev, test;

  /// Writes graph.json, train.json, dev.json and test.json.
  void save(const std::filesystem::path& dir) const;
  static SyntheticCorpus load(const std::filesystem::path& dir);
};

SyntheticCorpus make_synthetic(const SyntheticOptions& opts = {});

}  // namespace kgdial
