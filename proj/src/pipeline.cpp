#include "kgdial/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "kgdial/errors.hpp"
#include "kgdial/text.hpp"

namespace kgdial {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Runs `fn` as pipeline stage `name`, timing it and tagging failures.
template <typename Fn>
auto stage(const char* name, std::map<std::string, double>& timings, Fn&& fn) {
  const auto t0 = Clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings[name] += ms_since(t0);
    } else {
      auto r = fn();
      timings[name] += ms_since(t0);
      return r;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

nlohmann::json ranked_json(const RankedKnowledge& r) {
  auto out = nlohmann::json::array();
  for (const auto& s : r)
    out.push_back({{"head", s.triple.head},
                   {"relation", s.triple.relation},
                   {"tail", s.triple.tail},
                   {"score", s.score}});
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  if (top_n_knowledge != 1 && top_n_knowledge != 3)
    throw ConfigError("top_n_knowledge must be 1 or 3");
  if (n_recall == 0) throw ConfigError("n_recall must be positive");
  if (max_history == 0) throw ConfigError("max_history must be positive");
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  if (expansion_depth < 0) throw ConfigError("expansion_depth must be non-negative");
  if (decode.beam_width < 1) throw ConfigError("decode.beam_width must be >= 1");
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"recall_algo", to_string(recall_algo)}, {"n_recall", n_recall},
          {"top_n_knowledge", top_n_knowledge},    {"decode", decode.to_json()},
          {"max_history", max_history},            {"max_len", max_len},
          {"expansion_depth", expansion_depth}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const PipelineConfig& base) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig c = base;
  try {
    if (j.contains("recall_algo"))
      c.recall_algo = parse_recall_algorithm(j.at("recall_algo").get<std::string>());
    c.n_recall = j.value("n_recall", c.n_recall);
    c.top_n_knowledge = j.value("top_n_knowledge", c.top_n_knowledge);
    if (j.contains("decode")) c.decode = DecodeConfig::from_json(j.at("decode"));
    c.max_history = j.value("max_history", c.max_history);
    c.max_len = j.value("max_len", c.max_len);
    c.expansion_depth = j.value("expansion_depth", c.expansion_depth);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  return from_json(j, PipelineConfig{});
}

Selection select_knowledge(const ModelBundle& models, std::span<const std::string> history,
                           const PipelineConfig& cfg, const MemoryUnit* memory) {
  const auto& graph = *models.graph;
  Selection sel;
  auto& tm = sel.timings_ms;
  const std::size_t first = history.size() > cfg.max_history ? history.size() - cfg.max_history : 0;
  const auto window = history.subspan(first);

  sel.recall = stage("recall", tm, [&] {
    return models.index(cfg.recall_algo).recall(join_history(window), cfg.n_recall);
  });

  stage("memory", tm, [&] {
    sel.candidates.origin = TopicOrigin::kRoughRecall;
    for (const auto& t : sel.recall.topics)
      if (graph.is_topic(t)) sel.candidates.add(t);
    if (memory)
      for (const auto& t : memory->topics.names) sel.candidates.add(t);
  });

  sel.expanded = stage("expansion", tm, [&] {
    auto e = expand_related_topics(graph, sel.candidates, cfg.expansion_depth);
    e.origin = TopicOrigin::kExpansion;
    return e;
  });
  sel.k0 = stage("knowledge", tm, [&] { return knowledge_for_topics(graph, sel.expanded); });

  stage("topic", tm, [&] {
    sel.scores = models.topic->predict(models.tokenizer, window, true);
    auto best = select_best_topic(sel.scores, graph, sel.candidates);
    if (!best) {
      sel.fallback = true;
      best = graph.topics()[sel.scores.argmax()];
      TopicSet only{{*best}, TopicOrigin::kRoughRecall};
      for (auto& t : knowledge_for_topics(graph, only).triples)
        if (std::find(sel.k0.triples.begin(), sel.k0.triples.end(), t) == sel.k0.triples.end())
          sel.k0.triples.push_back(std::move(t));
    }
    sel.best_topic = *best;
  });

  stage("k1", tm, [&] {
    auto k1 = induce_k1(graph, sel.k0.triples, sel.best_topic);
    if (memory && !memory->last_selected.empty()) {
      std::vector<KnowledgeTriple> kept;
      for (const auto& t : k1.triples)
        if (std::find(memory->last_selected.begin(), memory->last_selected.end(), t) ==
            memory->last_selected.end())
          kept.push_back(t);
      if (!kept.empty() && kept.size() < k1.triples.size()) {
        k1.triples = std::move(kept);
        sel.excluded_previous = true;
      }
    }
    if (k1.triples.empty())
      throw std::runtime_error("topic '" + sel.best_topic + "' has no candidate knowledge");
    sel.k1 = std::move(k1.triples);
  });

  stage("rank", tm, [&] {
    sel.ranked = models.matcher->rank(models.tokenizer, window, sel.k1, sel.k1.size());
    sel.selected.assign(sel.ranked.begin(),
                        sel.ranked.begin() + static_cast<std::ptrdiff_t>(
                                                 std::min(cfg.top_n_knowledge, sel.ranked.size())));
  });
  return sel;
}

nlohmann::json TurnTrace::to_json(bool include_timings) const {
  auto scores = nlohmann::json::array();
  for (const auto& s : topic_scores) scores.push_back({{"topic", s.topic}, {"score", s.score}});
  nlohmann::json j{{"turn", turn},
                   {"user", user},
                   {"recalled", recalled},
                   {"memory_topics", memory_topics},
                   {"expanded", expanded},
                   {"topic_scores", scores},
                   {"best_topic", best_topic},
                   {"fallback", fallback},
                   {"k0_size", k0_size},
                   {"k1_size", k1_size},
                   {"excluded_previous", excluded_previous},
                   {"ranked", ranked_json(ranked)},
                   {"selected", ranked_json(selected)},
                   {"generator_input", generator_input},
                   {"reply", reply},
                   {"nsp_score", nsp_score}};
  if (include_timings) j["timings_ms"] = timings_ms;
  return j;
}

TurnResult chat_turn(const ModelBundle& models, Session& session, const std::string& utterance) {
  if (trim(utterance).empty()) throw StageError("input", "empty utterance");
  const auto& cfg = session.config;
  std::vector<std::string> history = session.history;
  history.push_back(utterance);

  Selection sel = select_knowledge(models, history, cfg, &session.memory);
  auto tm = sel.timings_ms;

  const std::size_t first = history.size() > cfg.max_history ? history.size() - cfg.max_history : 0;
  const std::span<const std::string> window(history.data() + first, history.size() - first);
  std::vector<KnowledgeTriple> knowledge;
  for (const auto& s : sel.selected) knowledge.push_back(s.triple);

  const auto input = stage("input", tm, [&] {
    return build_generator_input(models.tokenizer, knowledge, window,
                                 std::min(cfg.max_len, models.generator->config().max_len));
  });
  const auto out = stage("generate", tm, [&] { return models.generator->generate(input.ids, cfg.decode); });

  TurnResult r;
  r.reply = models.tokenizer.decode(out.tokens);
  auto& t = r.trace;
  t.turn = session.traces.size();
  t.user = utterance;
  t.recalled = sel.recall.topics;
  t.memory_topics = session.memory.topics.names;
  t.expanded = sel.expanded.names;
  for (std::size_t id : sel.scores.top_k(10))
    t.topic_scores.push_back({models.graph->topics()[id], sel.scores.scores[id]});
  t.best_topic = sel.best_topic;
  t.fallback = sel.fallback;
  t.k0_size = sel.k0.triples.size();
  t.k1_size = sel.k1.size();
  t.excluded_previous = sel.excluded_previous;
  t.ranked = sel.ranked;
  t.selected = sel.selected;
  t.generator_input = models.tokenizer.decode(input.ids, false);
  t.reply = r.reply;
  t.nsp_score = out.nsp_score;
  t.timings_ms = std::move(tm);

  // Commit only after every stage succeeded.
  session.history.push_back(utterance);
  session.history.push_back(r.reply);
  session.memory.topics.add(sel.best_topic);
  for (const auto& k : knowledge)
    if (std::find(session.memory.knowledge.begin(), session.memory.knowledge.end(), k) ==
        session.memory.knowledge.end())
      session.memory.knowledge.push_back(k);
  session.memory.last_selected = knowledge;
  session.traces.push_back(t);
  return r;
}

SessionManager::SessionManager(std::shared_ptr<const ModelBundle> models, PipelineConfig defaults)
    : models_(std::move(models)), defaults_(std::move(defaults)) {
  if (!models_) throw ConfigError("session manager needs models");
  models_->require_complete();
  defaults_.validate();
}

std::string SessionManager::create_session(const PipelineConfig& config) {
  config.validate();
  models_->index(config.recall_algo);
  std::lock_guard lock(mutex_);
  auto s = std::make_shared<Slot>();
  s->session.id = "s" + std::to_string(next_id_++);
  s->session.config = config;
  sessions_[s->session.id] = s;
  return s->session.id;
}

std::shared_ptr<SessionManager::Slot> SessionManager::slot(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

TurnResult SessionManager::chat(const std::string& id, const std::string& utterance) {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  return chat_turn(*models_, s->session, utterance);
}

TurnTrace SessionManager::trace(const std::string& id, std::size_t turn) const {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  if (turn >= s->session.traces.size())
    throw NotFoundError("session '" + id + "' has no turn " + std::to_string(turn));
  return s->session.traces[turn];
}

Session SessionManager::snapshot(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  return s->session;
}

std::size_t SessionManager::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

}  // namespace kgdial
