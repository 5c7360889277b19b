#include "kgdial/evaluation.hpp"

#include <cstdio>
#include <sstream>

#include "kgdial/errors.hpp"
#include "kgdial/metrics.hpp"
#include "kgdial/text.hpp"

namespace kgdial {

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace

std::string_view to_string(KnowledgeSource s) {
  switch (s) {
    case KnowledgeSource::kGold: return "gold";
    case KnowledgeSource::kRecalled1: return "recalled@1";
    case KnowledgeSource::kRecalled3: return "recalled@3";
  }
  return "?";
}

KnowledgeSource parse_knowledge_source(std::string_view name) {
  if (name == "gold") return KnowledgeSource::kGold;
  if (name == "recalled@1") return KnowledgeSource::kRecalled1;
  if (name == "recalled@3") return KnowledgeSource::kRecalled3;
  throw ConfigError("unknown knowledge source '" + std::string(name) + "'");
}

std::vector<EvalTurn> eval_turns(const Corpus& corpus) {
  std::vector<EvalTurn> out;
  for (auto& rt : reply_turns(corpus)) {
    if (rt.reply->attrs.empty()) continue;
    EvalTurn t{std::move(rt.history), rt.reply->text, {}};
    for (const auto& k : rt.reply->attrs)
      if (std::find(t.gold.begin(), t.gold.end(), k) == t.gold.end()) t.gold.push_back(k);
    out.push_back(std::move(t));
  }
  return out;
}

GeneratorSource::GeneratorSource(const ModelBundle& models, DecodeConfig decode, std::size_t max_len)
    : models_(models), decode_(decode), max_len_(max_len) {
  if (!models_.generator) throw ConfigError("missing generator model");
}

std::string GeneratorSource::respond(const EvalTurn& turn, std::span<const KnowledgeTriple> knowledge) {
  const auto input = build_generator_input(models_.tokenizer, knowledge, turn.history,
                                           std::min(max_len_, models_.generator->config().max_len));
  return models_.tokenizer.decode(models_.generator->generate(input.ids, decode_).tokens);
}

nlohmann::json GenEvalReport::to_json() const {
  return {{"condition", condition}, {"split", split},         {"samples", samples},
          {"avg_bleu", avg_bleu},   {"distinct2", distinct2}, {"distinct2_undefined", distinct2_undefined}};
}

GenEvalReport evaluate_pipeline(std::span<const EvalTurn> turns, const ModelBundle& models,
                                const PipelineConfig& cfg, KnowledgeSource source,
                                ResponseSource& responder, std::string split) {
  if (source != KnowledgeSource::kGold) models.require_complete();
  PipelineConfig run = cfg;
  if (source == KnowledgeSource::kRecalled1) run.top_n_knowledge = 1;
  if (source == KnowledgeSource::kRecalled3) run.top_n_knowledge = 3;

  GenEvalReport report;
  report.condition = std::string(to_string(source));
  report.split = std::move(split);
  std::vector<Tokens> hyps, refs;
  for (const auto& t : turns) {
    std::vector<KnowledgeTriple> knowledge;
    if (source == KnowledgeSource::kGold) {
      knowledge = t.gold;
    } else {
      for (const auto& s : select_knowledge(models, t.history, run).selected) knowledge.push_back(s.triple);
    }
    hyps.push_back(split_tokens(responder.respond(t, knowledge)));
    refs.push_back(split_tokens(t.reply));
  }
  report.samples = turns.size();
  report.avg_bleu = corpus_bleu_avg(hyps, refs);
  try {
    report.distinct2 = distinct2(hyps);
  } catch (const std::invalid_argument&) {
    report.distinct2_undefined = true;
  }
  return report;
}

nlohmann::json SelectionReport::to_json() const {
  return {{"split", split},
          {"samples", samples},
          {"accuracy", {{"1", at1}, {"3", at3}, {"5", at5}}},
          {"topic_accuracy", topic_accuracy},
          {"topic_correct", topic_correct},
          {"conditional_accuracy", {{"1", cond_at1}, {"3", cond_at3}, {"5", cond_at5}}}};
}

SelectionReport evaluate_selection(std::span<const EvalTurn> turns, const ModelBundle& models,
                                   const PipelineConfig& cfg, std::string split) {
  models.require_complete();
  SelectionReport r;
  r.split = std::move(split);
  r.samples = turns.size();
  std::vector<RankedKnowledge> ranked, cond_ranked;
  std::vector<std::vector<KnowledgeTriple>> gold, cond_gold;
  for (const auto& t : turns) {
    auto sel = select_knowledge(models, t.history, cfg);
    ranked.push_back(sel.ranked);
    gold.push_back(t.gold);
    if (!t.gold.empty() && sel.best_topic == t.gold.front().head) {
      cond_ranked.push_back(sel.ranked);
      cond_gold.push_back(t.gold);
    }
  }
  r.at1 = selection_accuracy_at_n(ranked, gold, 1);
  r.at3 = selection_accuracy_at_n(ranked, gold, 3);
  r.at5 = selection_accuracy_at_n(ranked, gold, 5);
  r.topic_correct = cond_ranked.size();
  r.topic_accuracy = turns.empty() ? 0.0 : 100.0 * static_cast<double>(r.topic_correct) / static_cast<double>(turns.size());
  r.cond_at1 = selection_accuracy_at_n(cond_ranked, cond_gold, 1);
  r.cond_at3 = selection_accuracy_at_n(cond_ranked, cond_gold, 3);
  r.cond_at5 = selection_accuracy_at_n(cond_ranked, cond_gold, 5);
  return r;
}

std::string format_accuracy_table(const std::string& title, std::span<const AccuracyRow> rows) {
  std::ostringstream os;
  os << title << "\n" << pad("Model", 32) << pad("valid", 10) << "test\n";
  for (const auto& row : rows)
    os << pad(row.model, 32) << pad(fixed2(row.valid), 10) << fixed2(row.test) << "\n";
  return os.str();
}

std::string format_selection_table(std::span<const std::pair<std::string, SelectionReport>> rows) {
  std::ostringstream os;
  os << pad("Model", 32) << pad("n=1", 10) << pad("n=3", 10) << "n=5\n";
  for (const auto& [name, r] : rows)
    os << pad(name, 32) << pad(fixed2(r.at1), 10) << pad(fixed2(r.at3), 10) << fixed2(r.at5) << "\n";
  return os.str();
}

std::string format_generation_table(std::span<const GenEvalReport> rows) {
  std::ostringstream os;
  os << pad("Condition", 32) << pad("split", 8) << pad("AVG.B", 10) << "Dis-2\n";
  for (const auto& r : rows)
    os << pad(r.condition, 32) << pad(r.split, 8) << pad(fixed2(r.avg_bleu), 10)
       << fixed2(r.distinct2) << "\n";
  return os.str();
}

}  // namespace kgdial
