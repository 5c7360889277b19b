#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgdial/datasets.hpp"
#include "kgdial/kg_store.hpp"
#include "kgdial/nn/layers.hpp"
#include "kgdial/nn/optim.hpp"
#include "kgdial/tokenizer.hpp"

namespace kgdial {

enum class MatcherVariant { kTwinShared, kTwinDiff, kPairwise };

std::string_view to_string(MatcherVariant v);
/// Accepts "twin" / "twin-shared", "twin-diff" and "pairwise".
MatcherVariant parse_matcher_variant(std::string_view name);

struct ScoredTriple {
  KnowledgeTriple triple;
  double score = 0.0;
};

/// Non-increasing scores, at most top_n entries.
using RankedKnowledge = std::vector<ScoredTriple>;

/// Stable sort of `k1` by `scores` (descending, ties keep K1 order), cut to
/// `top_n`.
RankedKnowledge rank_by_scores(std::span<const KnowledgeTriple> k1, std::span<const double> scores,
                               std::size_t top_n);

/// Pairwise input: [CLS] u1 [SEP] u2 [SEP] u3 [SEP] ka [SEP] kb [SEP] over the
/// last `history_utts` utterances, history front-truncated to fit `max_len`.
std::vector<int> encode_pair_input(const Tokenizer& tok, std::span<const std::string> history,
                                   std::string_view ka, std::string_view kb,
                                   std::size_t history_utts = 3, std::size_t max_len = 500);

/// Segment ids of a pairwise input: 0 for [CLS] and history, 1 for ka and
/// its [SEP], 2 for kb and the final [SEP].
std::vector<int> pair_segment_ids(std::span<const int> ids);

/// Knowledge matcher. The twin variants encode history and knowledge into
/// [CLS] vectors a and b and score [a; b; |a - b|] through a linear layer;
/// twin-shared uses one encoder for both sides, twin-diff two. The pairwise
/// variant scores "ka is more relevant than kb" from one joint input.
class Matcher {
 public:
  Matcher(const nn::ModelConfig& cfg, MatcherVariant variant, std::uint64_t seed = 0,
          std::size_t max_len = 400, std::size_t knowledge_max_len = 64,
          std::size_t pair_max_len = 500);

  MatcherVariant variant() const { return variant_; }
  bool is_twin() const { return variant_ != MatcherVariant::kPairwise; }

  /// [CLS] vector of the history (1 x d).
  nn::Var history_vector(std::span<const int> ids, bool train = false, nn::Rng* rng = nullptr) const;
  /// [CLS] vector of the knowledge (1 x d).
  nn::Var knowledge_vector(std::span<const int> ids, bool train = false,
                           nn::Rng* rng = nullptr) const;
  /// Raw logit of s_j for twin variants.
  nn::Var twin_logit(const nn::Var& a, const nn::Var& b) const;
  /// Raw logit of s_ij for the pairwise variant; segment ids come from
  /// pair_segment_ids.
  nn::Var pair_logit(std::span<const int> ids, bool train = false, nn::Rng* rng = nullptr) const;

  std::vector<int> encode_history_ids(const Tokenizer& tok,
                                      std::span<const std::string> history) const;
  std::vector<int> encode_knowledge_ids(const Tokenizer& tok, const KnowledgeTriple& k) const;

  /// s_j in (0, 1) for twin variants.
  double score(const Tokenizer& tok, std::span<const std::string> history,
               const KnowledgeTriple& k) const;
  /// s_ij in (0, 1) for the pairwise variant.
  double score_pairwise(const Tokenizer& tok, std::span<const std::string> history,
                        const KnowledgeTriple& ka, const KnowledgeTriple& kb) const;
  /// Per-candidate scores. Twin: s_j with the history encoded once.
  /// Pairwise: mean of s_ij against every other candidate (0.5 when alone).
  std::vector<double> score_all(const Tokenizer& tok, std::span<const std::string> history,
                                std::span<const KnowledgeTriple> k1) const;
  RankedKnowledge rank(const Tokenizer& tok, std::span<const std::string> history,
                       std::span<const KnowledgeTriple> k1, std::size_t top_n) const;

  const nn::Encoder& history_encoder() const { return encoder_a_; }
  const nn::Encoder& knowledge_encoder() const { return shared() ? encoder_a_ : encoder_b_; }
  const nn::ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  void save(const std::filesystem::path& path) const;
  static Matcher load(const std::filesystem::path& path);

 private:
  bool shared() const { return variant_ == MatcherVariant::kTwinShared; }

  nn::ModelConfig cfg_;
  MatcherVariant variant_;
  std::size_t max_len_, knowledge_max_len_, pair_max_len_;
  nn::ParameterStore store_;
  nn::Encoder encoder_a_, encoder_b_;
  nn::Linear head_;
};

/// Samples of one history: index range into MatchDataset::samples.
struct MatchGroup {
  std::vector<std::size_t> members;
};
std::vector<MatchGroup> group_match_samples(const MatchDataset& data);

/// L_sbert over one group: -sum_pos log s_j - sum_neg log(1 - s_j), with the
/// history encoded once.
nn::Var sbert_loss(const Matcher& m, const Tokenizer& tok, const MatchDataset& data,
                   const MatchGroup& group, bool train = false, nn::Rng* rng = nullptr);

/// L_ranking over one group: -sum log s_ij over (pos, neg) pairs minus
/// sum log(1 - s_ij) over (neg, pos) pairs.
nn::Var ranking_loss(const Matcher& m, const Tokenizer& tok, const MatchDataset& data,
                     const MatchGroup& group, bool train = false, nn::Rng* rng = nullptr);

struct MatcherReport {
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
};

/// Trains on D_kg; the batch size counts history groups. Throws
/// ValidationError on an empty dataset or one without positives.
MatcherReport train_matcher(Matcher& m, const Tokenizer& tok, const MatchDataset& data,
                            const nn::TrainConfig& cfg);

/// Binary classification accuracy in percent. Twin: s_j > 0.5 against the
/// label. Pairwise: over ordered (pos, neg) and (neg, pos) pairs.
double matcher_accuracy(const Matcher& m, const Tokenizer& tok, const MatchDataset& data);

/// Percentage of groups whose gold triple ranks first among the group's
/// candidates.
double matcher_top1(const Matcher& m, const Tokenizer& tok, const MatchDataset& data);

}  // namespace kgdial
