#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kgdial/corpus.hpp"
#include "kgdial/model_bundle.hpp"
#include "kgdial/pipeline.hpp"

namespace kgdial {

enum class KnowledgeSource { kGold, kRecalled1, kRecalled3 };

std::string_view to_string(KnowledgeSource s);
/// Accepts "gold", "recalled@1" and "recalled@3".
KnowledgeSource parse_knowledge_source(std::string_view name);

/// An annotated reply position of a test corpus.
struct EvalTurn {
  std::vector<std::string> history;
  std::string reply;
  std::vector<KnowledgeTriple> gold;
};

/// Reply turns whose reply carries knowledge annotations.
std::vector<EvalTurn> eval_turns(const Corpus& corpus);

/// Produces the reply scored against the reference.
class ResponseSource {
 public:
  virtual ~ResponseSource() = default;
  virtual std::string respond(const EvalTurn& turn, std::span<const KnowledgeTriple> knowledge) = 0;
};

/// The trained generator.
class GeneratorSource : public ResponseSource {
 public:
  GeneratorSource(const ModelBundle& models, DecodeConfig decode, std::size_t max_len = 400);
  std::string respond(const EvalTurn& turn, std::span<const KnowledgeTriple> knowledge) override;

 private:
  const ModelBundle& models_;
  DecodeConfig decode_;
  std::size_t max_len_;
};

/// Returns the reference reply; a self-test hook for the harness.
class EchoSource : public ResponseSource {
 public:
  std::string respond(const EvalTurn& turn, std::span<const KnowledgeTriple>) override {
    return turn.reply;
  }
};

struct GenEvalReport {
  std::string condition;
  std::string split;
  std::size_t samples = 0;
  double avg_bleu = 0.0;
  double distinct2 = 0.0;
  /// Distinct-2 was undefined (no bigram in any reply) and reported as 0.
  bool distinct2_undefined = false;

  nlohmann::json to_json() const;
};

/// Generates a reply per turn with knowledge from `source` and scores AVG.B
/// and Dis-2. Recalled conditions run the selection stages with m = 1 or 3
/// on a fresh memory. Throws ConfigError when a needed model is missing.
GenEvalReport evaluate_pipeline(std::span<const EvalTurn> turns, const ModelBundle& models,
                                const PipelineConfig& cfg, KnowledgeSource source,
                                ResponseSource& responder, std::string split = "test");

struct SelectionReport {
  std::string split;
  std::size_t samples = 0;
  /// End to end, from rough recall to the ranked knowledge.
  double at1 = 0.0, at3 = 0.0, at5 = 0.0;
  /// Restricted to turns whose selected topic is the gold topic.
  std::size_t topic_correct = 0;
  double cond_at1 = 0.0, cond_at3 = 0.0, cond_at5 = 0.0;
  double topic_accuracy = 0.0;

  nlohmann::json to_json() const;
};

SelectionReport evaluate_selection(std::span<const EvalTurn> turns, const ModelBundle& models,
                                   const PipelineConfig& cfg, std::string split = "test");

struct AccuracyRow {
  std::string model;
  double valid = 0.0;
  double test = 0.0;
};

/// Aligned text tables in the layouts of the classification, selection and
/// generation reports.
std::string format_accuracy_table(const std::string& title, std::span<const AccuracyRow> rows);
std::string format_selection_table(std::span<const std::pair<std::string, SelectionReport>> rows);
std::string format_generation_table(std::span<const GenEvalReport> rows);

}  // namespace kgdial
