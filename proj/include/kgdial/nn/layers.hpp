#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kgdial/nn/autograd.hpp"

namespace kgdial::nn {

struct ModelConfig {
  int vocab_size = 0;
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 0;  // 0 means 4 * hidden
  int max_positions = 512;
  /// Segment (token type) embeddings; 0 disables them.
  int type_vocab = 0;
  double dropout = 0.0;

  int ffn_dim() const { return ffn > 0 ? ffn : 4 * hidden; }
  /// Throws ConfigError unless hidden % heads == 0, layers >= 0, sizes > 0.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

enum class Init { kNormal, kZeros, kOnes };

/// Named parameters of one model, in creation order. A shared parameter is
/// registered once and referenced by every layer that uses it.
class ParameterStore {
 public:
  Var create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng,
             double stddev = 0.02);
  Var get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::size_t scalar_count() const;
  void zero_grad();
  /// FNV-1a over the raw bytes of one parameter's values.
  static std::uint64_t checksum(const Var& v);

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng);
  Var operator()(const Var& x) const { return add_row(matmul(x, weight), bias); }
  RowVector apply(const RowVector& x) const;
};

struct LayerNorm {
  Var gamma, beta;
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, int dim, Rng& rng);
  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }
  RowVector apply(const RowVector& x) const;
};

struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads = 1;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name, int dim, int heads, Rng& rng);
  /// Queries from `x`, keys/values from `memory`; `mask` is additive
  /// (rows = queries, cols = keys) or null.
  Var operator()(const Var& x, const Var& memory, const Matrix* mask) const;
};

struct FeedForward {
  Linear up, down;
  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& name, int dim, int hidden, Rng& rng);
  Var operator()(const Var& x) const { return down(gelu(up(x))); }
  RowVector apply(const RowVector& x) const;
};

/// Post-LN encoder layer.
struct EncoderLayer {
  MultiHeadAttention attn;
  LayerNorm ln1;
  FeedForward ff;
  LayerNorm ln2;
};

/// Post-LN decoder layer; `cross` is used only when cross attention is on.
struct DecoderLayer {
  MultiHeadAttention self_attn;
  LayerNorm ln1;
  MultiHeadAttention cross;
  LayerNorm ln2;
  FeedForward ff;
  LayerNorm ln3;
};

/// Additive key-padding mask: columns j with mask[j] == 0 get -1e9.
Matrix padding_mask(std::span<const int> mask, Eigen::Index queries);
/// Additive causal mask: entry (i, j) is -1e9 for j > i.
Matrix causal_mask(Eigen::Index n);

/// Transformer encoder: token + learned positional embedding followed by
/// `layers` post-LN blocks. With zero layers the output is the embedding sum.
class Encoder {
 public:
  Encoder() = default;
  /// Pass `token_embedding` to share a table with another module.
  Encoder(ParameterStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng,
          Var token_embedding = nullptr);

  /// `mask` marks real tokens with 1 and padding with 0 (empty: all real).
  /// Throws std::out_of_range for ids outside the vocabulary. `types` holds
  /// one segment id per token when type_vocab > 0 (empty: all zero).
  Var forward(std::span<const int> ids, std::span<const int> mask = {}, bool train = false,
              Rng* rng = nullptr, std::span<const int> types = {}) const;

  const Var& token_embedding() const { return tok_; }
  const Var& position_embedding() const { return pos_; }
  const Var& type_embedding() const { return type_; }
  const std::vector<EncoderLayer>& layers() const { return layers_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  Var tok_, pos_, type_;
  std::vector<EncoderLayer> layers_;
};

/// Transformer decoder with causal self attention, optional cross attention
/// and an output projection tied to its token embedding.
class Decoder {
 public:
  /// KV cache for incremental decoding.
  struct State {
    std::vector<Matrix> self_k, self_v;    // per layer, rows = positions so far
    std::vector<Matrix> cross_k, cross_v;  // per layer, rows = memory length
    int position = 0;
    bool has_memory = false;
  };

  Decoder() = default;
  Decoder(ParameterStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng,
          bool cross_attention, Var token_embedding = nullptr);

  /// Teacher-forced hidden states (rows = ids). `memory` may be null or have
  /// zero rows, in which case cross attention is skipped.
  Var forward(std::span<const int> ids, const Var& memory, bool train = false,
              Rng* rng = nullptr) const;
  /// hidden * E^T
  Var logits(const Var& hidden) const { return matmul_nt(hidden, tok_); }

  State start(const Matrix* memory) const;
  /// Feeds one token; returns its output logits and writes the final hidden
  /// state to `hidden` if given.
  RowVector step(State& state, int token, RowVector* hidden = nullptr) const;

  bool cross_attention() const { return cross_; }
  const Var& token_embedding() const { return tok_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  bool cross_ = false;
  Var tok_, pos_;
  std::vector<DecoderLayer> layers_;
};

}  // namespace kgdial::nn
