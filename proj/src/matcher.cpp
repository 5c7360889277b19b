#include "kgdial/matcher.hpp"

#include <algorithm>
#include <numeric>

#include "kgdial/errors.hpp"
#include "kgdial/nn/checkpoint.hpp"

namespace kgdial {

using nn::Matrix;
using nn::Var;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Var accumulate(const Var& total, const Var& term) { return total ? nn::add(total, term) : term; }

}  // namespace

std::string_view to_string(MatcherVariant v) {
  switch (v) {
    case MatcherVariant::kTwinShared: return "twin";
    case MatcherVariant::kTwinDiff: return "twin-diff";
    case MatcherVariant::kPairwise: return "pairwise";
  }
  return "?";
}

MatcherVariant parse_matcher_variant(std::string_view name) {
  if (name == "twin" || name == "twin-shared") return MatcherVariant::kTwinShared;
  if (name == "twin-diff") return MatcherVariant::kTwinDiff;
  if (name == "pairwise") return MatcherVariant::kPairwise;
  throw ConfigError("unknown matcher variant '" + std::string(name) + "'");
}

RankedKnowledge rank_by_scores(std::span<const KnowledgeTriple> k1, std::span<const double> scores,
                               std::size_t top_n) {
  if (k1.size() != scores.size()) throw std::invalid_argument("rank_by_scores: size mismatch");
  std::vector<std::size_t> order(k1.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RankedKnowledge out;
  for (std::size_t i = 0; i < order.size() && i < top_n; ++i)
    out.push_back({k1[order[i]], scores[order[i]]});
  return out;
}

std::vector<int> encode_pair_input(const Tokenizer& tok, std::span<const std::string> history,
                                   std::string_view ka, std::string_view kb,
                                   std::size_t history_utts, std::size_t max_len) {
  std::vector<int> tail;
  for (auto text : {ka, kb}) {
    for (int id : tok.encode(text)) tail.push_back(id);
    tail.push_back(special::kSep);
  }
  if (tail.size() + 1 > max_len) throw ValidationError("pairwise input: knowledge exceeds max_len");
  std::vector<int> hist;
  const std::size_t first = history.size() > history_utts ? history.size() - history_utts : 0;
  for (std::size_t i = first; i < history.size(); ++i) {
    for (int id : tok.encode(history[i])) hist.push_back(id);
    hist.push_back(special::kSep);
  }
  const std::size_t budget = max_len - 1 - tail.size();
  std::vector<int> out{special::kCls};
  const std::size_t skip = hist.size() > budget ? hist.size() - budget : 0;
  out.insert(out.end(), hist.begin() + static_cast<std::ptrdiff_t>(skip), hist.end());
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

std::vector<int> pair_segment_ids(std::span<const int> ids) {
  std::vector<int> types(ids.size(), 0);
  int seps = 0;
  for (std::size_t i = ids.size(); i-- > 0;) {
    if (ids[i] == special::kSep) ++seps;
    if (seps > 2 || ids[i] == special::kCls) break;
    types[i] = seps == 1 ? 2 : 1;
  }
  return types;
}

Matcher::Matcher(const nn::ModelConfig& cfg, MatcherVariant variant, std::uint64_t seed,
                 std::size_t max_len, std::size_t knowledge_max_len, std::size_t pair_max_len)
    : cfg_(cfg),
      variant_(variant),
      max_len_(max_len),
      knowledge_max_len_(knowledge_max_len),
      pair_max_len_(pair_max_len) {
  const auto limit = static_cast<std::size_t>(cfg_.max_positions);
  if (max_len_ > limit || knowledge_max_len_ > limit || (!is_twin() && pair_max_len_ > limit))
    throw ConfigError("matcher: input lengths exceed max_positions");
  nn::Rng rng(seed);
  if (variant_ == MatcherVariant::kPairwise) {
    cfg_.type_vocab = std::max(cfg_.type_vocab, 3);
    encoder_a_ = nn::Encoder(store_, "encoder", cfg_, rng);
    head_ = nn::Linear(store_, "head", cfg_.hidden, 1, rng);
    return;
  }
  encoder_a_ = nn::Encoder(store_, shared() ? "encoder" : "encoder_history", cfg_, rng);
  if (!shared()) encoder_b_ = nn::Encoder(store_, "encoder_knowledge", cfg_, rng);
  head_ = nn::Linear(store_, "head", 3 * cfg_.hidden, 1, rng);
}

Var Matcher::history_vector(std::span<const int> ids, bool train, nn::Rng* rng) const {
  return nn::slice_rows(encoder_a_.forward(ids, {}, train, rng), 0, 1);
}

Var Matcher::knowledge_vector(std::span<const int> ids, bool train, nn::Rng* rng) const {
  return nn::slice_rows(knowledge_encoder().forward(ids, {}, train, rng), 0, 1);
}

Var Matcher::twin_logit(const Var& a, const Var& b) const {
  if (!is_twin()) throw ConfigError("twin_logit on a pairwise matcher");
  const Var parts[] = {a, b, nn::abs(nn::sub(a, b))};
  return head_(nn::concat_cols(parts));
}

Var Matcher::pair_logit(std::span<const int> ids, bool train, nn::Rng* rng) const {
  if (is_twin()) throw ConfigError("pair_logit on a twin matcher");
  const auto types = pair_segment_ids(ids);
  return head_(nn::slice_rows(encoder_a_.forward(ids, {}, train, rng, types), 0, 1));
}

std::vector<int> Matcher::encode_history_ids(const Tokenizer& tok,
                                             std::span<const std::string> history) const {
  return encode_history(tok, history, kHistoryWindow, max_len_);
}

std::vector<int> Matcher::encode_knowledge_ids(const Tokenizer& tok,
                                               const KnowledgeTriple& k) const {
  return encode_single(tok, k.text(), knowledge_max_len_);
}

double Matcher::score(const Tokenizer& tok, std::span<const std::string> history,
                      const KnowledgeTriple& k) const {
  nn::NoGradGuard guard;
  const Var a = history_vector(encode_history_ids(tok, history));
  return sigmoid(twin_logit(a, knowledge_vector(encode_knowledge_ids(tok, k)))->scalar());
}

double Matcher::score_pairwise(const Tokenizer& tok, std::span<const std::string> history,
                               const KnowledgeTriple& ka, const KnowledgeTriple& kb) const {
  nn::NoGradGuard guard;
  const auto ids = encode_pair_input(tok, history, ka.text(), kb.text(), 3, pair_max_len_);
  return sigmoid(pair_logit(ids)->scalar());
}

std::vector<double> Matcher::score_all(const Tokenizer& tok, std::span<const std::string> history,
                                       std::span<const KnowledgeTriple> k1) const {
  nn::NoGradGuard guard;
  std::vector<double> scores;
  if (k1.empty()) return scores;
  if (is_twin()) {
    const Var a = history_vector(encode_history_ids(tok, history));
    for (const auto& k : k1)
      scores.push_back(sigmoid(twin_logit(a, knowledge_vector(encode_knowledge_ids(tok, k)))->scalar()));
    return scores;
  }
  if (k1.size() == 1) return {0.5};
  scores.assign(k1.size(), 0.0);
  for (std::size_t i = 0; i < k1.size(); ++i)
    for (std::size_t j = 0; j < k1.size(); ++j)
      if (i != j) scores[i] += score_pairwise(tok, history, k1[i], k1[j]);
  for (auto& s : scores) s /= static_cast<double>(k1.size() - 1);
  return scores;
}

RankedKnowledge Matcher::rank(const Tokenizer& tok, std::span<const std::string> history,
                              std::span<const KnowledgeTriple> k1, std::size_t top_n) const {
  const auto scores = score_all(tok, history, k1);
  return rank_by_scores(k1, scores, top_n);
}

void Matcher::save(const std::filesystem::path& path) const {
  nlohmann::json config{{"model", cfg_.to_json()},
                        {"variant", to_string(variant_)},
                        {"max_len", max_len_},
                        {"knowledge_max_len", knowledge_max_len_},
                        {"pair_max_len", pair_max_len_}};
  nn::Checkpoint::from_store("matcher", std::move(config), store_).save(path);
}

Matcher Matcher::load(const std::filesystem::path& path) {
  const auto ckpt = nn::Checkpoint::load(path);
  if (ckpt.kind != "matcher") throw FormatError(path.string() + ": not a matcher checkpoint");
  const auto& c = ckpt.config;
  Matcher m(nn::ModelConfig::from_json(c.at("model")),
            parse_matcher_variant(c.at("variant").get<std::string>()), 0,
            c.at("max_len").get<std::size_t>(), c.at("knowledge_max_len").get<std::size_t>(),
            c.at("pair_max_len").get<std::size_t>());
  ckpt.restore(m.store_);
  return m;
}

std::vector<MatchGroup> group_match_samples(const MatchDataset& data) {
  std::vector<MatchGroup> groups;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    if (i == 0 || data.samples[i].group != data.samples[i - 1].group) groups.emplace_back();
    groups.back().members.push_back(i);
  }
  return groups;
}

Var sbert_loss(const Matcher& m, const Tokenizer& tok, const MatchDataset& data,
               const MatchGroup& group, bool train, nn::Rng* rng) {
  if (group.members.empty()) throw ValidationError("empty match group");
  const auto& first = data.samples[group.members.front()];
  const Var a = m.history_vector(m.encode_history_ids(tok, first.history), train, rng);
  std::vector<Var> logits;
  std::vector<double> labels;
  for (std::size_t idx : group.members) {
    const auto& s = data.samples[idx];
    const Var b = m.knowledge_vector(m.encode_knowledge_ids(tok, s.knowledge), train, rng);
    logits.push_back(m.twin_logit(a, b));
    labels.push_back(static_cast<double>(s.label));
  }
  // Stack the 1x1 logits side by side and take the summed BCE.
  return nn::bce_with_logits(logits.size() == 1 ? logits[0] : nn::concat_cols(logits), labels);
}

Var ranking_loss(const Matcher& m, const Tokenizer& tok, const MatchDataset& data,
                 const MatchGroup& group, bool train, nn::Rng* rng) {
  std::vector<const MatchSample*> pos, neg;
  for (std::size_t idx : group.members)
    (data.samples[idx].label == 1 ? pos : neg).push_back(&data.samples[idx]);
  const auto& history = data.samples[group.members.front()].history;
  std::vector<Var> logits;
  std::vector<double> labels;
  for (const auto* p : pos) {
    for (const auto* n : neg) {
      const auto pt = p->knowledge.text(), nt = n->knowledge.text();
      logits.push_back(m.pair_logit(encode_pair_input(tok, history, pt, nt), train, rng));
      labels.push_back(1.0);
      logits.push_back(m.pair_logit(encode_pair_input(tok, history, nt, pt), train, rng));
      labels.push_back(0.0);
    }
  }
  if (logits.empty()) return nullptr;
  return nn::bce_with_logits(nn::concat_cols(logits), labels);
}

MatcherReport train_matcher(Matcher& m, const Tokenizer& tok, const MatchDataset& data,
                            const nn::TrainConfig& cfg) {
  cfg.validate();
  if (data.samples.empty()) throw ValidationError("matching dataset is empty");
  if (data.positives == 0) throw ValidationError("matching dataset has no positives");
  auto groups = group_match_samples(data);
  if (!m.is_twin()) {
    // Groups without both labels contribute no pairs.
    std::erase_if(groups, [&](const MatchGroup& g) {
      bool p = false, n = false;
      for (auto i : g.members) (data.samples[i].label ? p : n) = true;
      return !(p && n);
    });
    if (groups.empty()) throw ValidationError("pairwise training needs groups with both labels");
  }
  nn::Rng rng(cfg.seed);
  nn::AdamW opt(m.params(), cfg);
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t batches = (groups.size() + bs - 1) / bs;
  const long total = static_cast<long>(batches) * cfg.epochs;
  MatcherReport report;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(groups.begin(), groups.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * bs, hi = std::min(groups.size(), lo + bs);
      auto loss_fn = [&]() {
        Var total_loss;
        for (std::size_t g = lo; g < hi; ++g)
          total_loss = accumulate(total_loss, m.is_twin()
                                                  ? sbert_loss(m, tok, data, groups[g], true, &rng)
                                                  : ranking_loss(m, tok, data, groups[g], true, &rng));
        return nn::scale(total_loss, 1.0 / static_cast<double>(hi - lo));
      };
      epoch_loss += nn::train_step(m.params(), opt, loss_fn, step++, total, cfg.lr);
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  report.steps = static_cast<std::size_t>(step);
  return report;
}

double matcher_accuracy(const Matcher& m, const Tokenizer& tok, const MatchDataset& data) {
  std::size_t hits = 0, total = 0;
  for (const auto& g : group_match_samples(data)) {
    const auto& history = data.samples[g.members.front()].history;
    if (m.is_twin()) {
      std::vector<KnowledgeTriple> ks;
      for (auto i : g.members) ks.push_back(data.samples[i].knowledge);
      const auto scores = m.score_all(tok, history, ks);
      for (std::size_t j = 0; j < g.members.size(); ++j, ++total)
        if ((scores[j] > 0.5) == (data.samples[g.members[j]].label == 1)) ++hits;
      continue;
    }
    for (auto i : g.members) {
      if (data.samples[i].label != 1) continue;
      for (auto j : g.members) {
        if (data.samples[j].label != 0) continue;
        const auto& kp = data.samples[i].knowledge;
        const auto& kn = data.samples[j].knowledge;
        if (m.score_pairwise(tok, history, kp, kn) > 0.5) ++hits;
        if (m.score_pairwise(tok, history, kn, kp) < 0.5) ++hits;
        total += 2;
      }
    }
  }
  return total ? 100.0 * static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

double matcher_top1(const Matcher& m, const Tokenizer& tok, const MatchDataset& data) {
  std::size_t hits = 0, total = 0;
  for (const auto& g : group_match_samples(data)) {
    std::vector<KnowledgeTriple> ks;
    for (auto i : g.members) ks.push_back(data.samples[i].knowledge);
    const auto ranked = m.rank(tok, data.samples[g.members.front()].history, ks, 1);
    ++total;
    for (auto i : g.members)
      if (data.samples[i].label == 1 && data.samples[i].knowledge == ranked.front().triple) {
        ++hits;
        break;
      }
  }
  return total ? 100.0 * static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

}  // namespace kgdial
