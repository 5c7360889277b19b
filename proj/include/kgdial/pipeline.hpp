#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgdial/generator.hpp"
#include "kgdial/matcher.hpp"
#include "kgdial/model_bundle.hpp"
#include "kgdial/recall.hpp"
#include "kgdial/topic_model.hpp"

namespace kgdial {

/// JSON keys: recall_algo, n_recall, top_n_knowledge, decode, max_history,
/// max_len, expansion_depth.
struct PipelineConfig {
  RecallAlgorithm recall_algo = RecallAlgorithm::kLexical;
  std::size_t n_recall = 50;
  /// m, the knowledge pieces handed to the generator.
  std::size_t top_n_knowledge = 1;
  DecodeConfig decode;
  std::size_t max_history = 10;
  std::size_t max_len = 400;
  int expansion_depth = 1;

  /// Throws ConfigError unless m is 1 or 3 and the sizes are positive.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static PipelineConfig from_json(const nlohmann::json& j, const PipelineConfig& base);
  static PipelineConfig from_json(const nlohmann::json& j);
};

/// Per-session store of previously selected topics and knowledge.
struct MemoryUnit {
  TopicSet topics{{}, TopicOrigin::kMemory};
  std::vector<KnowledgeTriple> knowledge;
  /// Knowledge chosen on the previous turn; not re-selected on the next.
  std::vector<KnowledgeTriple> last_selected;

  bool empty() const { return topics.empty() && knowledge.empty(); }
};

/// Output of the knowledge-selection stages for one history.
struct Selection {
  RecallResult recall;
  /// T0 followed by memory topics.
  TopicSet candidates;
  TopicSet expanded;
  TopicScores scores;
  std::string best_topic;
  /// No candidate topic was usable; the global argmax was taken.
  bool fallback = false;
  KnowledgeSet k0;
  std::vector<KnowledgeTriple> k1;
  /// Previous-turn knowledge was removed from K1.
  bool excluded_previous = false;
  RankedKnowledge ranked;
  RankedKnowledge selected;
  std::map<std::string, double> timings_ms;
};

/// Recall, memory merge, expansion, K0, topic selection, K1 and ranking.
/// Throws StageError naming the failing stage.
Selection select_knowledge(const ModelBundle& models, std::span<const std::string> history,
                           const PipelineConfig& cfg, const MemoryUnit* memory = nullptr);

struct TopicScoreEntry {
  std::string topic;
  double score = 0.0;
};

struct TurnTrace {
  std::size_t turn = 0;
  std::string user;
  std::vector<std::string> recalled;
  std::vector<std::string> memory_topics;
  std::vector<std::string> expanded;
  std::vector<TopicScoreEntry> topic_scores;  // top 10
  std::string best_topic;
  bool fallback = false;
  std::size_t k0_size = 0;
  std::size_t k1_size = 0;
  bool excluded_previous = false;
  RankedKnowledge ranked;
  RankedKnowledge selected;
  std::string generator_input;
  std::string reply;
  double nsp_score = 0.0;
  std::map<std::string, double> timings_ms;

  nlohmann::json to_json(bool include_timings = true) const;
};

struct Session {
  std::string id;
  PipelineConfig config;
  /// Alternating user / bot utterances; append-only.
  std::vector<std::string> history;
  MemoryUnit memory;
  std::vector<TurnTrace> traces;
};

struct TurnResult {
  std::string reply;
  TurnTrace trace;
};

/// One pass of the full loop. On success appends the utterance and reply to
/// the history and updates memory; on failure throws StageError and leaves
/// the session untouched.
TurnResult chat_turn(const ModelBundle& models, Session& session, const std::string& utterance);

/// Thread-safe session registry. Turns within a session are serialized;
/// different sessions run concurrently.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const ModelBundle> models, PipelineConfig defaults);

  /// Throws ConfigError for an invalid config.
  std::string create_session(const PipelineConfig& config);
  std::string create_session() { return create_session(defaults_); }
  /// Throws NotFoundError for an unknown id.
  TurnResult chat(const std::string& id, const std::string& utterance);
  TurnTrace trace(const std::string& id, std::size_t turn) const;
  /// Copy of the session state.
  Session snapshot(const std::string& id) const;
  std::size_t session_count() const;

  const PipelineConfig& defaults() const { return defaults_; }
  const ModelBundle& models() const { return *models_; }

 private:
  struct Slot {
    std::mutex mutex;
    Session session;
  };
  std::shared_ptr<Slot> slot(const std::string& id) const;

  std::shared_ptr<const ModelBundle> models_;
  PipelineConfig defaults_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::size_t next_id_ = 1;
};

}  // namespace kgdial
