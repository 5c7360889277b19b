#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgdial/corpus.hpp"
#include "kgdial/kg_store.hpp"

namespace kgdial {

/// Histories keep at most this many utterances before the reply.
inline constexpr std::size_t kHistoryWindow = 10;

/// D_topic record: history before a reply and the reply's topic id.
struct TopicSample {
  std::vector<std::string> history;
  std::size_t label = 0;
  std::size_t dialogue = 0;
  std::size_t turn = 0;
};

struct TopicDataset {
  std::vector<TopicSample> samples;
  std::size_t skipped_unannotated = 0;
  std::size_t skipped_unknown_topic = 0;
};

/// D_kg record. Samples sharing `group` share the same history.
struct MatchSample {
  std::vector<std::string> history;
  KnowledgeTriple knowledge;
  int label = 0;
  std::size_t group = 0;
};

struct MatchDataset {
  std::vector<MatchSample> samples;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  /// Sum over positives of (neg_ratio - negatives actually drawn).
  std::size_t shortfall = 0;
};

/// D_cg record. `knowledge` holds the gold triples of the reply; the
/// `distractors` (same topic first) pad the knowledge input to m pieces.
struct GenSample {
  std::vector<std::string> history;
  std::vector<KnowledgeTriple> knowledge;
  std::vector<KnowledgeTriple> distractors;
  std::string reply;
  int nsp_label = 1;
  std::size_t dialogue = 0;
  std::size_t turn = 0;
  /// Negative reply came from the same dialogue (single-dialogue corpora).
  bool same_dialogue_negative = false;
};

struct GenDataset {
  std::vector<GenSample> samples;
  std::size_t same_dialogue_negatives = 0;
};

/// A reply position with its window of prior utterances.
struct ReplyTurn {
  std::size_t dialogue = 0;
  std::size_t turn = 0;
  std::vector<std::string> history;
  const Message* reply = nullptr;
};

/// All turns with index >= 1, history clipped to `window` utterances.
std::vector<ReplyTurn> reply_turns(const Corpus& corpus, std::size_t window = kHistoryWindow);

TopicDataset build_topic_samples(const Corpus& corpus, const KnowledgeGraph& graph);

MatchDataset build_matching_samples(const Corpus& corpus, const KnowledgeGraph& graph,
                                    int neg_ratio = 4, std::uint64_t seed = 0);

GenDataset build_generation_samples(const Corpus& corpus, const KnowledgeGraph& graph,
                                    std::uint64_t seed = 0, std::size_t max_distractors = 4);

nlohmann::json to_json(const TopicSample& s);
nlohmann::json to_json(const MatchSample& s);
nlohmann::json to_json(const GenSample& s);

/// Writes one JSON object per line.
template <typename Sample>
void write_jsonl(const std::vector<Sample>& samples, const std::filesystem::path& path);

}  // namespace kgdial
