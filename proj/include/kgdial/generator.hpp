#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kgdial/datasets.hpp"
#include "kgdial/kg_store.hpp"
#include "kgdial/nn/layers.hpp"
#include "kgdial/nn/optim.hpp"
#include "kgdial/tokenizer.hpp"

namespace kgdial {

enum class GenArch { kEncDec, kDecOnly };

std::string_view to_string(GenArch a);
/// Accepts "encdec" and "deconly".
GenArch parse_gen_arch(std::string_view name);

/// Context fed to the generator:
/// [CLS] k1 [SEP] ... km [SEP] [speakerX] u1 ... [speaker1] un
/// where the last utterance carries [speaker1] and speakers alternate
/// backwards from it.
struct GeneratorInput {
  std::vector<int> ids;
  /// Knowledge pieces that fit (rank order).
  std::size_t knowledge_used = 0;
  /// Leading history tokens dropped to fit max_len.
  std::size_t history_tokens_dropped = 0;
};

/// Knowledge is protected first: pieces are dropped from the end only while
/// more than one remains; the history is front-truncated into what is left.
/// Throws ValidationError if a single piece does not fit in `max_len` and
/// std::invalid_argument on empty knowledge or history.
GeneratorInput build_generator_input(const Tokenizer& tok, std::span<const KnowledgeTriple> knowledge,
                                     std::span<const std::string> history, std::size_t max_len = 400);

struct GeneratorConfig {
  nn::ModelConfig model;
  GenArch arch = GenArch::kEncDec;
  /// One embedding table for encoder and decoder (encdec only).
  bool share_embeddings = false;
  /// Multi-task training with the NSP head; without it only positives are
  /// trained, on L_LM.
  bool nsp = true;
  /// Knowledge pieces per input (m).
  int knowledge_count = 1;
  /// Permits m outside {1, 3}.
  bool allow_any_m = false;
  std::size_t max_len = 400;
  std::size_t max_reply_len = 64;

  void validate() const;
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

struct DecodeConfig {
  enum class Mode { kGreedy, kBeam };
  Mode mode = Mode::kGreedy;
  int beam_width = 4;
  std::size_t max_new_tokens = 32;

  nlohmann::json to_json() const;
  static DecodeConfig from_json(const nlohmann::json& j);
};

struct GenerationOutput {
  /// Reply ids without [EOS].
  std::vector<int> tokens;
  /// log p of each emitted token, plus [EOS] when `finished`.
  std::vector<double> token_log_probs;
  double log_prob = 0.0;
  /// log_prob divided by token_log_probs.size().
  double normalized_log_prob = 0.0;
  /// sigmoid of the NSP head on the last reply token.
  double nsp_score = 0.0;
  bool finished = false;
};

struct GenLosses {
  nn::Var lm;
  nn::Var nsp;
  nn::Var total;
};

/// L_total = alpha L_LM + (1 - alpha) L_NSP with alpha = 0.5 for p = 1 and
/// alpha = 0 for p = 0.
nn::Var multitask_loss(const nn::Var& lm, const nn::Var& nsp, int nsp_label);
double mixing_alpha(int nsp_label);

/// Encoder-decoder (encoder over the context, decoder with cross attention)
/// or decoder-only (context and reply in one causal sequence). The output
/// projection is tied to the decoder embedding.
class Generator {
 public:
  explicit Generator(const GeneratorConfig& cfg, std::uint64_t seed = 0);

  const GeneratorConfig& config() const { return cfg_; }

  GeneratorInput make_input(const Tokenizer& tok, std::span<const KnowledgeTriple> knowledge,
                            std::span<const std::string> history) const;
  /// Reply text to ids, cut to max_reply_len.
  std::vector<int> encode_reply(const Tokenizer& tok, std::string_view reply) const;

  /// Decoder hidden states for `dec_input` ([BOS] w1 ... plus anything
  /// appended), rows aligned with dec_input.
  nn::Var decoder_hidden(std::span<const int> ctx, std::span<const int> dec_input,
                         bool train = false, nn::Rng* rng = nullptr) const;
  /// NSP logit from a decoder hidden matrix at row `position`.
  nn::Var nsp_logit(const nn::Var& hidden, std::size_t position) const;

  /// Teacher-forced L_LM (mean token cross-entropy over w1..wm [EOS]),
  /// L_NSP and their mix.
  GenLosses losses(std::span<const int> ctx, std::span<const int> reply, int nsp_label,
                   bool train = false, nn::Rng* rng = nullptr) const;

  /// Batch teacher-forced sum of log p(w_i | S, w_<i), including [EOS] when
  /// `include_eos`.
  double sequence_log_prob(std::span<const int> ctx, std::span<const int> reply,
                           bool include_eos = true) const;
  /// Same quantity per token, computed by incremental decoding.
  std::vector<double> stepwise_log_probs(std::span<const int> ctx, std::span<const int> reply,
                                         bool include_eos = true) const;

  /// Greedy, or beam search returning the best hypothesis found at any
  /// width up to beam_width: finished before unfinished, then by
  /// length-normalized log-prob.
  GenerationOutput generate(std::span<const int> ctx, const DecodeConfig& decode) const;

  const nn::Encoder& encoder() const { return encoder_; }
  const nn::Decoder& decoder() const { return decoder_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  void save(const std::filesystem::path& path) const;
  static Generator load(const std::filesystem::path& path);

 private:
  struct Prefix;
  Prefix prefill(std::span<const int> ctx) const;
  GenerationOutput greedy(std::span<const int> ctx, std::size_t max_new) const;
  GenerationOutput beam(std::span<const int> ctx, int width, std::size_t max_new) const;

  GeneratorConfig cfg_;
  nn::ParameterStore store_;
  nn::Encoder encoder_;
  nn::Decoder decoder_;
  nn::Linear nsp_head_;
};

/// Knowledge fed for a sample: gold pieces first, then distractors, up to m.
std::vector<KnowledgeTriple> sample_knowledge(const GenSample& s, int m);

struct GeneratorReport {
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
  std::size_t samples_used = 0;
};

/// Trains on D_cg with the multi-task loss (or L_LM on positives only when
/// the NSP task is off). Throws ValidationError on an empty dataset.
GeneratorReport train_generator(Generator& g, const Tokenizer& tok, const GenDataset& data,
                                const nn::TrainConfig& cfg);

}  // namespace kgdial
