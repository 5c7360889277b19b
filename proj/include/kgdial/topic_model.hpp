#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgdial/datasets.hpp"
#include "kgdial/kg_store.hpp"
#include "kgdial/nn/layers.hpp"
#include "kgdial/nn/optim.hpp"
#include "kgdial/tokenizer.hpp"

namespace kgdial {

/// Classifier output over every graph topic, indexed by topic id.
struct TopicScores {
  std::vector<double> scores;
  bool normalized = false;

  /// Highest score; ties go to the lower topic id.
  std::size_t argmax() const;
  /// Ids of the k best topics, best first.
  std::vector<std::size_t> top_k(std::size_t k) const;
};

/// Encoder over the [CLS] u1 [SEP] ... history form, [CLS] state through a
/// linear head onto the topic count.
class TopicModel {
 public:
  TopicModel(const nn::ModelConfig& cfg, std::vector<std::string> topics, std::uint64_t seed = 0,
             std::size_t max_len = 400);

  nn::Var logits(std::span<const int> ids, bool train = false, nn::Rng* rng = nullptr) const;
  TopicScores predict_ids(std::span<const int> ids, bool apply_softmax) const;
  TopicScores predict(const Tokenizer& tok, std::span<const std::string> history,
                      bool apply_softmax) const;

  const std::vector<std::string>& topics() const { return topics_; }
  std::size_t max_len() const { return max_len_; }
  const nn::ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  void save(const std::filesystem::path& path) const;
  static TopicModel load(const std::filesystem::path& path);

 private:
  nn::ModelConfig cfg_;
  std::vector<std::string> topics_;
  std::size_t max_len_;
  nn::ParameterStore store_;
  nn::Encoder encoder_;
  nn::Linear head_;
};

/// Argmax of `scores` restricted to `t0`. Empty when no member of `t0` is a
/// graph topic. Throws ValidationError if the score vector does not cover
/// the graph's topics.
std::optional<std::string> select_best_topic(const TopicScores& scores,
                                             const KnowledgeGraph& graph, const TopicSet& t0);

struct K1Result {
  std::vector<KnowledgeTriple> triples;
  /// The best topic is not part of the graph.
  bool topic_absent = false;
};

/// Triples of K0 whose head is `best_topic`.
K1Result induce_k1(const KnowledgeGraph& graph, std::span<const KnowledgeTriple> k0,
                   const std::string& best_topic);

struct ClassifierReport {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
  std::size_t steps = 0;
};

/// Cross-entropy training over D_topic. Throws ValidationError for an empty
/// dataset or a label outside the model's topics.
ClassifierReport train_topic_model(TopicModel& model, const Tokenizer& tok,
                                   const TopicDataset& data, const nn::TrainConfig& cfg);

/// Percentage of samples whose argmax equals the label.
double topic_accuracy(const TopicModel& model, const Tokenizer& tok,
                      std::span<const TopicSample> samples);

}  // namespace kgdial
