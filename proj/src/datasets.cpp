#include "kgdial/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <unordered_set>

#include "kgdial/errors.hpp"
#include "kgdial/text.hpp"

namespace kgdial {

namespace {

using Rng = std::mt19937_64;
using TripleSet = std::unordered_set<KnowledgeTriple, KnowledgeTripleHash>;

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Partial Fisher-Yates: moves k uniformly chosen elements to the front.
template <typename T>
void choose_front(std::vector<T>& v, std::size_t k, Rng& rng) {
  k = std::min(k, v.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, v.size() - i);
    std::swap(v[i], v[j]);
  }
}

// Draws up to `k` distinct triples uniformly from the whole graph, skipping
// anything in `exclude`. Falls back to enumeration for small graphs or when
// rejection sampling stalls.
std::vector<KnowledgeTriple> sample_global(const KnowledgeGraph& graph, std::size_t k,
                                           const TripleSet& exclude, Rng& rng) {
  std::vector<KnowledgeTriple> out;
  if (k == 0) return out;
  const auto& all = graph.triples();
  TripleSet taken;
  if (all.size() > 4096) {
    for (std::size_t attempt = 0; attempt < 64 * k && out.size() < k; ++attempt) {
      const auto& t = all[uniform_index(rng, all.size())];
      if (exclude.contains(t) || taken.contains(t)) continue;
      taken.insert(t);
      out.push_back(t);
    }
    if (out.size() == k) return out;
  }
  std::vector<KnowledgeTriple> pool;
  TripleSet seen;
  for (const auto& t : all)
    if (!exclude.contains(t) && !taken.contains(t) && seen.insert(t).second) pool.push_back(t);
  choose_front(pool, k - out.size(), rng);
  for (std::size_t i = 0; i < pool.size() && out.size() < k; ++i) out.push_back(pool[i]);
  return out;
}

std::vector<KnowledgeTriple> same_topic_pool(const KnowledgeGraph& graph, const std::string& topic,
                                             const TripleSet& exclude) {
  std::vector<KnowledgeTriple> pool;
  TripleSet seen;
  for (std::size_t idx : graph.triples_of(topic)) {
    const auto& t = graph.triples()[idx];
    if (!exclude.contains(t) && seen.insert(t).second) pool.push_back(t);
  }
  return pool;
}

// Same-topic distractors first, then global ones, `k` in total at most.
std::vector<KnowledgeTriple> draw_negatives(const KnowledgeGraph& graph, const std::string& topic,
                                            const TripleSet& gold, std::size_t k, Rng& rng) {
  auto pool = same_topic_pool(graph, topic, gold);
  choose_front(pool, k, rng);
  if (pool.size() > k) pool.resize(k);
  if (pool.size() < k) {
    TripleSet exclude = gold;
    exclude.insert(pool.begin(), pool.end());
    for (auto& t : sample_global(graph, k - pool.size(), exclude, rng)) pool.push_back(std::move(t));
  }
  return pool;
}

nlohmann::json triple_json(const KnowledgeTriple& t) { return {t.head, t.relation, t.tail}; }

}  // namespace

std::vector<ReplyTurn> reply_turns(const Corpus& corpus, std::size_t window) {
  std::vector<ReplyTurn> out;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto& msgs = corpus[d].messages;
    for (std::size_t i = 1; i < msgs.size(); ++i) {
      ReplyTurn rt{d, i, {}, &msgs[i]};
      const std::size_t first = i > window ? i - window : 0;
      for (std::size_t j = first; j < i; ++j) rt.history.push_back(msgs[j].text);
      out.push_back(std::move(rt));
    }
  }
  return out;
}

TopicDataset build_topic_samples(const Corpus& corpus, const KnowledgeGraph& graph) {
  TopicDataset ds;
  for (auto& rt : reply_turns(corpus)) {
    if (rt.reply->attrs.empty()) {
      ++ds.skipped_unannotated;
      continue;
    }
    auto id = graph.topic_id(rt.reply->attrs.front().head);
    if (!id) {
      ++ds.skipped_unknown_topic;
      continue;
    }
    ds.samples.push_back({std::move(rt.history), *id, rt.dialogue, rt.turn});
  }
  return ds;
}

MatchDataset build_matching_samples(const Corpus& corpus, const KnowledgeGraph& graph,
                                    int neg_ratio, std::uint64_t seed) {
  if (neg_ratio < 0) throw ConfigError("neg_ratio must be non-negative");
  Rng rng(seed);
  MatchDataset ds;
  std::size_t group = 0;
  for (auto& rt : reply_turns(corpus)) {
    if (rt.reply->attrs.empty()) continue;
    const TripleSet gold(rt.reply->attrs.begin(), rt.reply->attrs.end());
    TripleSet emitted;
    for (const auto& pos : rt.reply->attrs) {
      if (!emitted.insert(pos).second) continue;
      ds.samples.push_back({rt.history, pos, 1, group});
      ++ds.positives;
      auto negs = draw_negatives(graph, pos.head, gold, static_cast<std::size_t>(neg_ratio), rng);
      ds.shortfall += static_cast<std::size_t>(neg_ratio) - negs.size();
      for (auto& n : negs) {
        ds.samples.push_back({rt.history, std::move(n), 0, group});
        ++ds.negatives;
      }
    }
    ++group;
  }
  return ds;
}

GenDataset build_generation_samples(const Corpus& corpus, const KnowledgeGraph& graph,
                                    std::uint64_t seed, std::size_t max_distractors) {
  Rng rng(seed);
  GenDataset ds;
  std::vector<std::pair<std::size_t, std::size_t>> reply_positions;
  for (std::size_t d = 0; d < corpus.size(); ++d)
    for (std::size_t i = 1; i < corpus[d].messages.size(); ++i) reply_positions.emplace_back(d, i);

  for (auto& rt : reply_turns(corpus)) {
    if (rt.reply->attrs.empty()) continue;
    const TripleSet gold(rt.reply->attrs.begin(), rt.reply->attrs.end());
    GenSample pos;
    pos.history = rt.history;
    for (const auto& t : rt.reply->attrs)
      if (std::find(pos.knowledge.begin(), pos.knowledge.end(), t) == pos.knowledge.end())
        pos.knowledge.push_back(t);
    pos.distractors = draw_negatives(graph, pos.knowledge.front().head, gold, max_distractors, rng);
    pos.reply = rt.reply->text;
    pos.nsp_label = 1;
    pos.dialogue = rt.dialogue;
    pos.turn = rt.turn;

    // Negative reply: a reply from another dialogue, different text.
    GenSample neg = pos;
    neg.nsp_label = 0;
    const bool single = corpus.size() < 2;
    bool found = false;
    for (int attempt = 0; attempt < 200 && !found; ++attempt) {
      const auto& [d, i] = reply_positions[uniform_index(rng, reply_positions.size())];
      if (!single && d == rt.dialogue) continue;
      if (single && i == rt.turn) continue;
      const auto& text = corpus[d].messages[i].text;
      if (text == pos.reply) continue;
      neg.reply = text;
      found = true;
    }
    if (!found) {
      for (const auto& [d, i] : reply_positions) {
        const auto& text = corpus[d].messages[i].text;
        if ((single || d != rt.dialogue) && text != pos.reply) {
          neg.reply = text;
          found = true;
          break;
        }
      }
    }
    if (!found) throw ValidationError("cannot draw a negative reply: corpus has no other replies");
    neg.same_dialogue_negative = single;
    if (single) ++ds.same_dialogue_negatives;
    ds.samples.push_back(std::move(pos));
    ds.samples.push_back(std::move(neg));
  }
  return ds;
}

nlohmann::json to_json(const TopicSample& s) {
  return {{"history", s.history}, {"label", s.label}, {"dialogue", s.dialogue}, {"turn", s.turn}};
}

nlohmann::json to_json(const MatchSample& s) {
  return {{"history", s.history},
          {"knowledge", triple_json(s.knowledge)},
          {"label", s.label},
          {"group", s.group}};
}

nlohmann::json to_json(const GenSample& s) {
  nlohmann::json kn = nlohmann::json::array(), dis = nlohmann::json::array();
  for (const auto& t : s.knowledge) kn.push_back(triple_json(t));
  for (const auto& t : s.distractors) dis.push_back(triple_json(t));
  return {{"history", s.history},     {"knowledge", kn},         {"distractors", dis},
          {"reply", s.reply},         {"p", s.nsp_label},        {"dialogue", s.dialogue},
          {"turn", s.turn},           {"same_dialogue_negative", s.same_dialogue_negative}};
}

template <typename Sample>
void write_jsonl(const std::vector<Sample>& samples, const std::filesystem::path& path) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json(s).dump();
    out += '\n';
  }
  write_file(path, out);
}

template void write_jsonl(const std::vector<TopicSample>&, const std::filesystem::path&);
template void write_jsonl(const std::vector<MatchSample>&, const std::filesystem::path&);
template void write_jsonl(const std::vector<GenSample>&, const std::filesystem::path&);

}  // namespace kgdial
