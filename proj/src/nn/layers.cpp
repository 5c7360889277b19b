#include "kgdial/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "kgdial/errors.hpp"

namespace kgdial::nn {

namespace {

constexpr double kMaskValue = -1e9;

RowVector gelu_row(const RowVector& x) {
  constexpr double c = 0.7978845608028654, a = 0.044715;
  return x.unaryExpr([](double z) { return 0.5 * z * (1.0 + std::tanh(c * (z + a * z * z * z))); });
}

// Single-query multi-head attention over cached keys/values.
RowVector attend(const RowVector& q, const Matrix& keys, const Matrix& values, int heads) {
  const Eigen::Index d = q.cols(), dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  RowVector out(d);
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index c0 = h * dh;
    Eigen::VectorXd scores = keys.middleCols(c0, dh) * q.segment(c0, dh).transpose() * scale;
    const double m = scores.maxCoeff();
    Eigen::VectorXd p = (scores.array() - m).exp();
    p /= p.sum();
    out.segment(c0, dh) = p.transpose() * values.middleCols(c0, dh);
  }
  return out;
}

void append_row(Matrix& m, const RowVector& row) {
  m.conservativeResize(m.rows() + 1, row.cols());
  m.row(m.rows() - 1) = row;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw ConfigError("model: vocab_size must be positive");
  if (hidden <= 0 || heads <= 0) throw ConfigError("model: hidden and heads must be positive");
  if (hidden % heads != 0) throw ConfigError("model: hidden must be divisible by heads");
  if (layers < 0) throw ConfigError("model: layers must be non-negative");
  if (max_positions <= 0) throw ConfigError("model: max_positions must be positive");
  if (type_vocab < 0) throw ConfigError("model: type_vocab must be non-negative");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"hidden", hidden}, {"layers", layers},
          {"heads", heads},           {"ffn", ffn},       {"max_positions", max_positions},
          {"dropout", dropout},       {"type_vocab", type_vocab}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ffn = j.value("ffn", c.ffn);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.dropout = j.value("dropout", c.dropout);
  c.type_vocab = j.value("type_vocab", c.type_vocab);
  return c;
}

Var ParameterStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                           Init init, Rng& rng, double stddev) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  Matrix m(rows, cols);
  switch (init) {
    case Init::kZeros: m.setZero(); break;
    case Init::kOnes: m.setOnes(); break;
    case Init::kNormal: {
      std::normal_distribution<double> dist(0.0, stddev);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
      break;
    }
  }
  auto v = parameter(std::move(m));
  entries_.emplace_back(name, v);
  return v;
}

Var ParameterStore::get(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  throw NotFoundError("no parameter named " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return true;
  return false;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : entries_) n += static_cast<std::size_t>(v->value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, v] : entries_)
    if (v->grad.size() != 0) v->grad.setZero();
}

std::uint64_t ParameterStore::checksum(const Var& v) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(v->value.data());
  const std::size_t n = static_cast<std::size_t>(v->value.size()) * sizeof(double);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

Linear::Linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng)
    : weight(store.create(name + ".weight", in, out, Init::kNormal, rng)),
      bias(store.create(name + ".bias", 1, out, Init::kZeros, rng)) {}

RowVector Linear::apply(const RowVector& x) const { return x * weight->value + bias->value; }

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, int dim, Rng& rng)
    : gamma(store.create(name + ".gamma", 1, dim, Init::kOnes, rng)),
      beta(store.create(name + ".beta", 1, dim, Init::kZeros, rng)) {}

RowVector LayerNorm::apply(const RowVector& x) const {
  const double mu = x.mean();
  const double var = (x.array() - mu).square().mean();
  RowVector xhat = (x.array() - mu) / std::sqrt(var + 1e-5);
  return xhat.cwiseProduct(gamma->value.row(0)) + beta->value.row(0);
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name, int dim,
                                       int heads_, Rng& rng)
    : q(store, name + ".q", dim, dim, rng),
      k(store, name + ".k", dim, dim, rng),
      v(store, name + ".v", dim, dim, rng),
      o(store, name + ".o", dim, dim, rng),
      heads(heads_) {}

Var MultiHeadAttention::operator()(const Var& x, const Var& memory, const Matrix* mask) const {
  const Var Q = q(x), K = k(memory), V = v(memory);
  const Eigen::Index d = Q->value.cols(), dh = d / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var scores = scale(matmul_nt(slice_cols(Q, h * dh, dh), slice_cols(K, h * dh, dh)), s);
    if (mask) scores = add_constant(scores, *mask);
    outs.push_back(matmul(softmax_rows(scores), slice_cols(V, h * dh, dh)));
  }
  return o(heads == 1 ? outs[0] : concat_cols(outs));
}

FeedForward::FeedForward(ParameterStore& store, const std::string& name, int dim, int hidden,
                         Rng& rng)
    : up(store, name + ".up", dim, hidden, rng), down(store, name + ".down", hidden, dim, rng) {}

RowVector FeedForward::apply(const RowVector& x) const { return down.apply(gelu_row(up.apply(x))); }

Matrix padding_mask(std::span<const int> mask, Eigen::Index queries) {
  Matrix m = Matrix::Zero(queries, static_cast<Eigen::Index>(mask.size()));
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j] == 0) m.col(static_cast<Eigen::Index>(j)).setConstant(kMaskValue);
  return m;
}

Matrix causal_mask(Eigen::Index n) {
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = kMaskValue;
  return m;
}

Encoder::Encoder(ParameterStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng,
                 Var token_embedding)
    : cfg_(cfg) {
  cfg_.validate();
  tok_ = token_embedding ? std::move(token_embedding)
                         : store.create(name + ".tok", cfg.vocab_size, cfg.hidden, Init::kNormal, rng);
  pos_ = store.create(name + ".pos", cfg.max_positions, cfg.hidden, Init::kNormal, rng);
  if (cfg.type_vocab > 0)
    type_ = store.create(name + ".type", cfg.type_vocab, cfg.hidden, Init::kNormal, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = name + ".layer" + std::to_string(l);
    layers_.push_back({MultiHeadAttention(store, p + ".attn", cfg.hidden, cfg.heads, rng),
                       LayerNorm(store, p + ".ln1", cfg.hidden, rng),
                       FeedForward(store, p + ".ff", cfg.hidden, cfg.ffn_dim(), rng),
                       LayerNorm(store, p + ".ln2", cfg.hidden, rng)});
  }
}

Var Encoder::forward(std::span<const int> ids, std::span<const int> mask, bool train,
                     Rng* rng, std::span<const int> types) const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (n == 0) throw std::invalid_argument("encoder: empty input");
  if (n > cfg_.max_positions) throw std::out_of_range("encoder: input longer than max_positions");
  if (!mask.empty() && mask.size() != ids.size())
    throw std::invalid_argument("encoder: mask length differs from input");
  if (!types.empty() && (!type_ || types.size() != ids.size()))
    throw std::invalid_argument("encoder: segment ids need type_vocab and one id per token");
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  Var x = add(gather_rows(tok_, ids), gather_rows(pos_, positions));
  if (type_) {
    const std::vector<int> zeros(types.empty() ? ids.size() : 0, 0);
    x = add(x, gather_rows(type_, types.empty() ? std::span<const int>(zeros) : types));
  }
  const bool drop = train && rng && cfg_.dropout > 0.0;
  if (drop) x = dropout(x, cfg_.dropout, *rng);
  std::optional<Matrix> m;
  if (!mask.empty()) m = padding_mask(mask, n);
  for (const auto& layer : layers_) {
    Var a = layer.attn(x, x, m ? &*m : nullptr);
    if (drop) a = dropout(a, cfg_.dropout, *rng);
    x = layer.ln1(add(x, a));
    Var f = layer.ff(x);
    if (drop) f = dropout(f, cfg_.dropout, *rng);
    x = layer.ln2(add(x, f));
  }
  return x;
}

Decoder::Decoder(ParameterStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng,
                 bool cross_attention, Var token_embedding)
    : cfg_(cfg), cross_(cross_attention) {
  cfg_.validate();
  tok_ = token_embedding ? std::move(token_embedding)
                         : store.create(name + ".tok", cfg.vocab_size, cfg.hidden, Init::kNormal, rng);
  pos_ = store.create(name + ".pos", cfg.max_positions, cfg.hidden, Init::kNormal, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = name + ".layer" + std::to_string(l);
    DecoderLayer layer;
    layer.self_attn = MultiHeadAttention(store, p + ".self", cfg.hidden, cfg.heads, rng);
    layer.ln1 = LayerNorm(store, p + ".ln1", cfg.hidden, rng);
    if (cross_) {
      layer.cross = MultiHeadAttention(store, p + ".cross", cfg.hidden, cfg.heads, rng);
      layer.ln2 = LayerNorm(store, p + ".ln2", cfg.hidden, rng);
    }
    layer.ff = FeedForward(store, p + ".ff", cfg.hidden, cfg.ffn_dim(), rng);
    layer.ln3 = LayerNorm(store, p + ".ln3", cfg.hidden, rng);
    layers_.push_back(std::move(layer));
  }
}

Var Decoder::forward(std::span<const int> ids, const Var& memory, bool train, Rng* rng) const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (n == 0) throw std::invalid_argument("decoder: empty input");
  if (n > cfg_.max_positions) throw std::out_of_range("decoder: input longer than max_positions");
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  Var x = add(gather_rows(tok_, ids), gather_rows(pos_, positions));
  const bool drop = train && rng && cfg_.dropout > 0.0;
  if (drop) x = dropout(x, cfg_.dropout, *rng);
  const Matrix causal = causal_mask(n);
  const bool use_memory = cross_ && memory && memory->value.rows() > 0;
  for (const auto& layer : layers_) {
    Var a = layer.self_attn(x, x, &causal);
    if (drop) a = dropout(a, cfg_.dropout, *rng);
    x = layer.ln1(add(x, a));
    if (use_memory) {
      Var c = layer.cross(x, memory, nullptr);
      if (drop) c = dropout(c, cfg_.dropout, *rng);
      x = layer.ln2(add(x, c));
    }
    Var f = layer.ff(x);
    if (drop) f = dropout(f, cfg_.dropout, *rng);
    x = layer.ln3(add(x, f));
  }
  return x;
}

Decoder::State Decoder::start(const Matrix* memory) const {
  State st;
  st.self_k.assign(layers_.size(), Matrix(0, cfg_.hidden));
  st.self_v.assign(layers_.size(), Matrix(0, cfg_.hidden));
  st.has_memory = cross_ && memory && memory->rows() > 0;
  if (st.has_memory) {
    for (const auto& layer : layers_) {
      st.cross_k.push_back((*memory * layer.cross.k.weight->value).rowwise() +
                           layer.cross.k.bias->value.row(0));
      st.cross_v.push_back((*memory * layer.cross.v.weight->value).rowwise() +
                           layer.cross.v.bias->value.row(0));
    }
  }
  return st;
}

RowVector Decoder::step(State& st, int token, RowVector* hidden) const {
  if (token < 0 || token >= tok_->value.rows()) throw std::out_of_range("decoder: token id out of range");
  if (st.position >= cfg_.max_positions) throw std::out_of_range("decoder: exceeded max_positions");
  RowVector x = tok_->value.row(token) + pos_->value.row(st.position);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    append_row(st.self_k[l], layer.self_attn.k.apply(x));
    append_row(st.self_v[l], layer.self_attn.v.apply(x));
    RowVector a = layer.self_attn.o.apply(
        attend(layer.self_attn.q.apply(x), st.self_k[l], st.self_v[l], layer.self_attn.heads));
    x = layer.ln1.apply(x + a);
    if (st.has_memory) {
      RowVector c = layer.cross.o.apply(
          attend(layer.cross.q.apply(x), st.cross_k[l], st.cross_v[l], layer.cross.heads));
      x = layer.ln2.apply(x + c);
    }
    x = layer.ln3.apply(x + layer.ff.apply(x));
  }
  ++st.position;
  if (hidden) *hidden = x;
  return x * tok_->value.transpose();
}

}  // namespace kgdial::nn
