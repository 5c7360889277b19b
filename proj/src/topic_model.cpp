#include "kgdial/topic_model.hpp"

#include <algorithm>
#include <numeric>

#include "kgdial/errors.hpp"
#include "kgdial/nn/checkpoint.hpp"

namespace kgdial {

using nn::Matrix;
using nn::Var;

std::size_t TopicScores::argmax() const {
  if (scores.empty()) throw ValidationError("argmax of empty scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

std::vector<std::size_t> TopicScores::top_k(std::size_t k) const {
  std::vector<std::size_t> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  ids.resize(std::min(k, ids.size()));
  return ids;
}

TopicModel::TopicModel(const nn::ModelConfig& cfg, std::vector<std::string> topics,
                       std::uint64_t seed, std::size_t max_len)
    : cfg_(cfg), topics_(std::move(topics)), max_len_(max_len) {
  if (topics_.empty()) throw ConfigError("topic model needs at least one topic");
  if (max_len_ < 2 || max_len_ > static_cast<std::size_t>(cfg_.max_positions))
    throw ConfigError("topic model: max_len must be in [2, max_positions]");
  nn::Rng rng(seed);
  encoder_ = nn::Encoder(store_, "encoder", cfg_, rng);
  head_ = nn::Linear(store_, "head", cfg_.hidden, static_cast<int>(topics_.size()), rng);
}

Var TopicModel::logits(std::span<const int> ids, bool train, nn::Rng* rng) const {
  Var h = encoder_.forward(ids, {}, train, rng);
  return head_(nn::slice_rows(h, 0, 1));
}

TopicScores TopicModel::predict_ids(std::span<const int> ids, bool apply_softmax) const {
  nn::NoGradGuard guard;
  Matrix z = logits(ids)->value;
  if (apply_softmax) z = nn::softmax(z);
  TopicScores s;
  s.scores.assign(z.data(), z.data() + z.size());
  s.normalized = apply_softmax;
  return s;
}

TopicScores TopicModel::predict(const Tokenizer& tok, std::span<const std::string> history,
                                bool apply_softmax) const {
  const auto ids = encode_history(tok, history, kHistoryWindow, max_len_);
  return predict_ids(ids, apply_softmax);
}

void TopicModel::save(const std::filesystem::path& path) const {
  nlohmann::json config{{"model", cfg_.to_json()}, {"topics", topics_}, {"max_len", max_len_}};
  nn::Checkpoint::from_store("topic", std::move(config), store_).save(path);
}

TopicModel TopicModel::load(const std::filesystem::path& path) {
  const auto ckpt = nn::Checkpoint::load(path);
  if (ckpt.kind != "topic") throw FormatError(path.string() + ": not a topic model checkpoint");
  TopicModel model(nn::ModelConfig::from_json(ckpt.config.at("model")),
                   ckpt.config.at("topics").get<std::vector<std::string>>(), 0,
                   ckpt.config.at("max_len").get<std::size_t>());
  ckpt.restore(model.store_);
  return model;
}

std::optional<std::string> select_best_topic(const TopicScores& scores,
                                             const KnowledgeGraph& graph, const TopicSet& t0) {
  if (scores.scores.size() != graph.topic_count())
    throw ValidationError("topic scores cover " + std::to_string(scores.scores.size()) +
                          " topics but the graph has " + std::to_string(graph.topic_count()));
  std::optional<std::size_t> best;
  for (const auto& name : t0.names) {
    const auto id = graph.topic_id(name);
    if (!id) continue;
    if (!best || scores.scores[*id] > scores.scores[*best] ||
        (scores.scores[*id] == scores.scores[*best] && *id < *best))
      best = id;
  }
  if (!best) return std::nullopt;
  return graph.topics()[*best];
}

K1Result induce_k1(const KnowledgeGraph& graph, std::span<const KnowledgeTriple> k0,
                   const std::string& best_topic) {
  K1Result r;
  r.topic_absent = !graph.is_topic(best_topic);
  if (r.topic_absent) return r;
  for (const auto& t : k0)
    if (t.head == best_topic) r.triples.push_back(t);
  return r;
}

ClassifierReport train_topic_model(TopicModel& model, const Tokenizer& tok,
                                   const TopicDataset& data, const nn::TrainConfig& cfg) {
  cfg.validate();
  if (data.samples.empty()) throw ValidationError("topic dataset is empty");
  std::vector<std::vector<int>> inputs;
  inputs.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    if (s.label >= model.topics().size())
      throw ValidationError("topic label " + std::to_string(s.label) + " out of range");
    inputs.push_back(encode_history(tok, s.history, kHistoryWindow, model.max_len()));
  }
  nn::Rng rng(cfg.seed);
  nn::AdamW opt(model.params(), cfg);
  const std::size_t batches = (inputs.size() + cfg.batch_size - 1) / cfg.batch_size;
  const long total = static_cast<long>(batches) * cfg.epochs;
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  ClassifierReport report;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(inputs.size(), lo + cfg.batch_size);
      auto loss_fn = [&]() {
        Var total_loss;
        for (std::size_t i = lo; i < hi; ++i) {
          const auto& s = data.samples[order[i]];
          const int target = static_cast<int>(s.label);
          Var l = nn::cross_entropy(model.logits(inputs[order[i]], true, &rng), {&target, 1});
          total_loss = total_loss ? nn::add(total_loss, l) : l;
        }
        return nn::scale(total_loss, 1.0 / static_cast<double>(hi - lo));
      };
      epoch_loss += nn::train_step(model.params(), opt, loss_fn, step++, total, cfg.lr);
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  report.steps = static_cast<std::size_t>(step);
  report.train_accuracy = topic_accuracy(model, tok, data.samples);
  return report;
}

double topic_accuracy(const TopicModel& model, const Tokenizer& tok,
                      std::span<const TopicSample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : samples)
    if (model.predict(tok, s.history, false).argmax() == s.label) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace kgdial
