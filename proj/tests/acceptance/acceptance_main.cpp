// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgdial/aho_corasick.hpp"
#include "kgdial/datasets.hpp"
#include "kgdial/errors.hpp"
#include "kgdial/evaluation.hpp"
#include "kgdial/metrics.hpp"
#include "kgdial/model_bundle.hpp"
#include "kgdial/nn/gradcheck.hpp"
#include "kgdial/pipeline.hpp"
#include "kgdial/recall.hpp"
#include "kgdial/recipes.hpp"
#include "kgdial/text.hpp"

namespace fs = std::filesystem;
using namespace kgdial;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  if (!ok) ++g_failures;
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

/// Runs one criterion; an exception counts as a failure.
void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
  try {
    const auto [ok, detail] = fn();
    report(name, ok, detail);
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

/// "a >= b" with the review tolerance: strict wins pass, a gap within 0.5
/// passes with a flag, anything worse fails.
std::pair<bool, std::string> ordering(const std::string& what, double a, double b) {
  const bool ok = a > b || std::abs(a - b) <= 0.5;
  std::string d = what + " " + fmt(a) + " vs " + fmt(b);
  if (std::abs(a - b) <= 0.5) d += " [FLAG: within 0.5, review]";
  return {ok, d};
}

std::vector<RecallSample> recall_samples(const Corpus& corpus) {
  std::vector<RecallSample> out;
  for (auto& rt : reply_turns(corpus))
    if (!rt.reply->attrs.empty()) out.push_back({std::move(rt.history), rt.reply->attrs.front().head});
  return out;
}

/// Trained toy models shared by the overfit, ablation and determinism checks.
struct Toy {
  DataSplits data;
  nlohmann::json config;
  Tokenizer tok;
  std::shared_ptr<TopicModel> topic;
  std::shared_ptr<Matcher> twin, twin_diff;
  std::shared_ptr<Generator> generator;
  double topic_train = 0, topic_dev = 0, topic_test = 0;
  double twin_top1 = 0, twin_heldout = 0, diff_heldout = 0;
  double train_seconds = 0;

  std::shared_ptr<const ModelBundle> bundle() const {
    auto b = std::make_shared<ModelBundle>();
    b->graph = std::make_shared<const KnowledgeGraph>(data.graph);
    b->tokenizer = tok;
    b->recall_documents = dialogue_documents(data.train);
    b->build_recall();
    b->topic = topic;
    b->matcher = twin;
    b->generator = generator;
    return b;
  }
};

Toy train_toy(const fs::path& data_dir, const fs::path& config_path) {
  const auto t0 = Clock::now();
  Toy t;
  t.data = DataSplits::load(data_dir);
  t.config = load_config(config_path);
  t.tok = build_tokenizer(t.data.train, t.data.graph);
  const auto& g = t.data.graph;

  const auto ts = config_section(t.config, "topic");
  t.topic = std::make_shared<TopicModel>(make_topic_model(ts, t.tok, g));
  const auto topic_train = build_topic_samples(t.data.train, g);
  t.topic_train = train_topic_model(*t.topic, t.tok, topic_train, train_config(ts)).train_accuracy;
  t.topic_dev = topic_accuracy(*t.topic, t.tok, build_topic_samples(t.data.dev, g).samples);
  t.topic_test = topic_accuracy(*t.topic, t.tok, build_topic_samples(t.data.test, g).samples);

  const auto ms = config_section(t.config, "matcher");
  const auto kg_train = build_matching_samples(t.data.train, g, 4, 0);
  auto kg_held = build_matching_samples(t.data.dev, g, 4, 1);
  const auto kg_test = build_matching_samples(t.data.test, g, 4, 2);
  kg_held.samples.insert(kg_held.samples.end(), kg_test.samples.begin(), kg_test.samples.end());
  t.twin = std::make_shared<Matcher>(make_matcher(ms, MatcherVariant::kTwinShared, t.tok));
  train_matcher(*t.twin, t.tok, kg_train, train_config(ms));
  t.twin_top1 = matcher_top1(*t.twin, t.tok, kg_train);
  t.twin_heldout = matcher_accuracy(*t.twin, t.tok, kg_held);
  t.twin_diff = std::make_shared<Matcher>(make_matcher(ms, MatcherVariant::kTwinDiff, t.tok));
  train_matcher(*t.twin_diff, t.tok, kg_train, train_config(ms));
  t.diff_heldout = matcher_accuracy(*t.twin_diff, t.tok, kg_held);

  const auto gs = config_section(t.config, "generator");
  const auto gcfg = generator_config(gs, t.tok);
  t.generator = std::make_shared<Generator>(make_generator(gcfg, gs));
  train_generator(*t.generator, t.tok, build_generation_samples(t.data.train, g, 0), train_config(gs));
  t.train_seconds = seconds_since(t0);
  return t;
}

/// Fits a fresh generator on 50 positive training samples and returns the
/// AVG.B of its greedy replies against those samples.
double generator_overfit(const Toy& t) {
  const auto gs = config_section(t.config, "generator");
  auto gcfg = generator_config(gs, t.tok);
  gcfg.nsp = false;
  Generator gen = make_generator(gcfg, gs);
  const auto all = build_generation_samples(t.data.train, t.data.graph, 0);
  GenDataset small;
  for (const auto& s : all.samples)
    if (s.nsp_label == 1 && small.samples.size() < 50) small.samples.push_back(s);
  auto tc = train_config(gs);
  tc.epochs = 60;
  train_generator(gen, t.tok, small, tc);
  DecodeConfig greedy;
  greedy.max_new_tokens = gcfg.max_reply_len;
  std::vector<Tokens> hyps, refs;
  for (const auto& s : small.samples) {
    const auto k = sample_knowledge(s, gcfg.knowledge_count);
    const auto in = gen.make_input(t.tok, k, s.history);
    hyps.push_back(split_tokens(t.tok.decode(gen.generate(in.ids, greedy).tokens)));
    refs.push_back(split_tokens(t.tok.decode(t.tok.encode(s.reply))));
  }
  return corpus_bleu_avg(hyps, refs);
}

nn::ModelConfig small_model(const Tokenizer& tok) {
  nn::ModelConfig c;
  c.vocab_size = static_cast<int>(tok.size());
  c.hidden = 16;
  c.layers = 1;
  c.heads = 2;
  c.ffn = 32;
  c.max_positions = 160;
  return c;
}

struct KdconvDomain {
  std::string name;
  KnowledgeGraph graph;
  std::vector<std::pair<std::string, Corpus>> splits;
};

/// A KdConv domain directory holds kb_<domain>.json and train/dev/test.json;
/// the root may be one domain or a parent of several.
std::vector<KdconvDomain> load_kdconv(const fs::path& root) {
  std::vector<fs::path> dirs;
  auto is_domain = [](const fs::path& d) {
    for (const auto& e : fs::directory_iterator(d))
      if (e.path().filename().string().rfind("kb_", 0) == 0) return true;
    return false;
  };
  if (is_domain(root)) dirs.push_back(root);
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && is_domain(e.path())) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw ConfigError("no KdConv domain (kb_*.json) under " + root.string());
  std::vector<KdconvDomain> out;
  for (const auto& d : dirs) {
    KdconvDomain dom;
    dom.name = d.filename().string();
    for (const auto& e : fs::directory_iterator(d))
      if (e.path().filename().string().rfind("kb_", 0) == 0) dom.graph = KnowledgeGraph::load(e.path());
    for (const char* split : {"train", "dev", "test"}) {
      const auto p = d / (std::string(split) + ".json");
      if (!fs::exists(p)) throw ConfigError("missing split " + p.string());
      dom.splits.emplace_back(split, load_corpus(p));
    }
    out.push_back(std::move(dom));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgdial acceptance checks"};
  std::string data_dir = KGDIAL_DATA_DIR "/synthetic";
  std::string config_path = KGDIAL_CONFIG_DIR "/toy.json";
  std::string kdconv_dir;
  if (const char* env = std::getenv("KGDIAL_KDCONV_DIR")) kdconv_dir = env;
  app.add_option("--data", data_dir, "Synthetic data directory");
  app.add_option("--config", config_path, "Toy training config");
  app.add_option("--kdconv", kdconv_dir, "KdConv data directory (default: $KGDIAL_KDCONV_DIR)");
  CLI11_PARSE(app, argc, argv);

  criterion("aho-corasick oracle equivalence", [] {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    const std::string alphabet = "abcd";
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<std::string> pats(1 + rng() % 50);
      for (auto& p : pats)
        for (std::size_t k = 0, n = 1 + rng() % 6; k < n; ++k) p += alphabet[rng() % alphabet.size()];
      std::string text;
      for (std::size_t k = 0, n = rng() % 201; k < n; ++k) text += alphabet[rng() % alphabet.size()];
      AhoCorasick ac(pats);
      std::set<std::pair<std::size_t, std::size_t>> got, want;
      ac.scan(text, [&](const AhoCorasick::Match& m) { got.insert({m.pattern, m.end}); });
      const auto& uniq = ac.patterns();
      for (std::size_t p = 0; p < uniq.size(); ++p)
        for (auto pos = text.find(uniq[p]); pos != std::string::npos; pos = text.find(uniq[p], pos + 1))
          want.insert({p, pos + uniq[p].size()});
      if (got != want) ++mismatches;
    }
    const double secs = seconds_since(t0);
    return std::pair{mismatches == 0 && secs < 5.0,
                     "1000 cases, " + std::to_string(mismatches) + " mismatches, " + fmt(secs) + " s"};
  });

  criterion("recall monotonicity and ordering", [&] {
    const auto data = DataSplits::load(data_dir);
    const auto docs = dialogue_documents(data.train);
    const auto samples = recall_samples(data.train);
    bool ok = true;
    std::string d = std::to_string(data.graph.topic_count()) + " topics, " +
                    std::to_string(data.train.size()) + " dialogues;";
    std::vector<double> at50;
    for (auto algo : {RecallAlgorithm::kTfidf, RecallAlgorithm::kLexical, RecallAlgorithm::kAhoCorasick}) {
      const auto idx = RecallIndex::build(data.graph, algo, docs);
      const auto curve = recall_accuracy_curve(idx, samples, 50);
      const bool mono = std::is_sorted(curve.begin(), curve.end());
      ok = ok && mono;
      at50.push_back(curve.back());
      d += " " + std::string(to_string(algo)) + " @1 " + fmt(curve.front()) + " @50 " + fmt(curve.back()) +
           (mono ? "" : " NOT MONOTONE");
    }
    ok = ok && at50[1] >= at50[0];
    if (at50[1] > at50[0]) d += "; lexical > tfidf at 50";
    else if (at50[1] == at50[0]) d += "; lexical = tfidf at 50 [FLAG: tie, ordering not separated]";
    else d += "; lexical < tfidf at 50";
    return std::pair{ok, d};
  });

  criterion("gradient checks", [&] {
    const auto t0 = Clock::now();
    const auto data = DataSplits::load(data_dir);
    const auto tok = build_tokenizer(data.train, data.graph);
    const auto kg = build_matching_samples(data.train, data.graph, 4, 0);
    const auto group = group_match_samples(kg).front();
    Matcher twin(small_model(tok), MatcherVariant::kTwinShared, 11, 64, 32, 128);
    Matcher pair(small_model(tok), MatcherVariant::kPairwise, 12, 64, 32, 128);
    const auto rs = nn::gradient_check(twin.params(), [&] { return sbert_loss(twin, tok, kg, group); }, 1e-5, 10);
    const auto rr = nn::gradient_check(pair.params(), [&] { return ranking_loss(pair, tok, kg, group); }, 1e-5, 10);
    GeneratorConfig gc;
    gc.model = small_model(tok);
    gc.max_len = 64;
    gc.max_reply_len = 16;
    Generator gen(gc, 13);
    const auto cg = build_generation_samples(data.train, data.graph, 0);
    const auto& s = cg.samples.front();
    const auto ctx = gen.make_input(tok, sample_knowledge(s, 1), s.history).ids;
    const auto reply = gen.encode_reply(tok, s.reply);
    const auto r0 = nn::gradient_check(gen.params(), [&] { return gen.losses(ctx, reply, 0).total; }, 1e-5, 8);
    const auto r5 = nn::gradient_check(gen.params(), [&] { return gen.losses(ctx, reply, 1).total; }, 1e-5, 8);
    const double secs = seconds_since(t0);
    const double worst = std::max({rs.max_rel_error, rr.max_rel_error, r0.max_rel_error, r5.max_rel_error});
    std::ostringstream d;
    d << std::scientific << std::setprecision(2) << "L_sbert " << rs.max_rel_error << ", L_ranking "
      << rr.max_rel_error << ", L_total(a=0) " << r0.max_rel_error << ", L_total(a=0.5) " << r5.max_rel_error
      << "; eps 1e-5; " << std::fixed << secs << " s";
    return std::pair{worst <= 1e-4 && secs < 60.0, d.str()};
  });

  criterion("loss identities", [&] {
    const auto data = DataSplits::load(data_dir);
    const auto tok = build_tokenizer(data.train, data.graph);
    std::vector<std::string> bad;

    GeneratorConfig gc;
    gc.model = small_model(tok);
    gc.max_len = 64;
    gc.max_reply_len = 16;
    Generator gen(gc, 21);
    const auto cg = build_generation_samples(data.train, data.graph, 0);
    for (std::size_t i = 0; i < 20 && i < cg.samples.size(); ++i) {
      const auto& s = cg.samples[i];
      const auto ctx = gen.make_input(tok, sample_knowledge(s, 1), s.history).ids;
      const auto l = gen.losses(ctx, gen.encode_reply(tok, s.reply), 0);
      if (l.total->scalar() != l.nsp->scalar()) bad.push_back("L_total(p=0) != L_NSP");
    }

    const auto kg = build_matching_samples(data.train, data.graph, 4, 0);
    Matcher twin(small_model(tok), MatcherVariant::kTwinShared, 22, 64, 32, 128);
    double worst_sbert = 0;
    const auto groups = group_match_samples(kg);
    for (std::size_t gi = 0; gi < 20 && gi < groups.size(); ++gi) {
      double expect = 0;
      for (auto i : groups[gi].members) {
        const auto& s = kg.samples[i];
        const double p = twin.score(tok, s.history, s.knowledge);
        expect += s.label ? -std::log(p) : -std::log(1.0 - p);
      }
      const double got = sbert_loss(twin, tok, kg, groups[gi])->scalar();
      worst_sbert = std::max(worst_sbert, std::abs(got - expect) / std::max(1.0, std::abs(expect)));
    }
    if (worst_sbert > 1e-8) bad.push_back("L_sbert off by " + std::to_string(worst_sbert));

    std::mt19937_64 rng(23);
    std::normal_distribution<double> nd(0.0, 20.0);
    double worst_sum = 0;
    for (int trial = 0; trial < 50; ++trial) {
      nn::Matrix x(1 + rng() % 8, 2 + rng() % 40);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
      const auto p = nn::softmax(x);
      worst_sum = std::max(worst_sum, (p.rowwise().sum().array() - 1.0).abs().maxCoeff());
    }
    TopicModel topic(small_model(tok), data.graph.topics(), 24, 128);
    const auto topic_samples = build_topic_samples(data.train, data.graph);
    std::size_t model_argmax_diff = 0;
    for (std::size_t i = 0; i < 50 && i < topic_samples.samples.size(); ++i) {
      const auto& h = topic_samples.samples[i].history;
      const auto soft = topic.predict(tok, h, true);
      const auto raw = topic.predict(tok, h, false);
      double sum = 0;
      for (double v : soft.scores) sum += v;
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      if (soft.argmax() != raw.argmax()) ++model_argmax_diff;
    }
    if (worst_sum > 1e-6) bad.push_back("softmax sum off by " + std::to_string(worst_sum));

    std::size_t argmax_diff = model_argmax_diff;
    std::uniform_int_distribution<int> len(2, 60);
    std::uniform_real_distribution<double> ud(-30.0, 30.0);
    for (int trial = 0; trial < 1000; ++trial) {
      nn::Matrix x(1, len(rng));
      std::set<double> seen;
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double v;
        do v = ud(rng);
        while (!seen.insert(v).second);
        x(0, j) = v;
      }
      const auto p = nn::softmax(x);
      TopicScores raw{{x.data(), x.data() + x.cols()}, false};
      TopicScores soft{{p.data(), p.data() + p.cols()}, true};
      if (raw.argmax() != soft.argmax() || raw.top_k(3) != soft.top_k(3)) ++argmax_diff;
    }
    if (argmax_diff) bad.push_back(std::to_string(argmax_diff) + " argmax disagreements");

    std::ostringstream d;
    d << std::scientific << std::setprecision(1) << "L_total(p=0)==L_NSP on 20 samples; L_sbert rel err "
      << worst_sbert << "; softmax max |sum-1| " << worst_sum << "; argmax invariant on 1000 random + 50 model vectors";
    for (const auto& b : bad) d << "; " << b;
    return std::pair{bad.empty(), d.str()};
  });

  const auto t_toy = Clock::now();
  std::unique_ptr<Toy> toy;
  criterion("overfit oracles", [&] {
    toy = std::make_unique<Toy>(train_toy(data_dir, config_path));
    const double gen_bleu = generator_overfit(*toy);
    const double secs = seconds_since(t_toy);
    const double heldout = std::min(toy->topic_dev, toy->topic_test);
    const bool ok = toy->topic_train >= 95.0 && heldout >= 80.0 && toy->twin_top1 >= 90.0 && gen_bleu >= 95.0 &&
                    secs < 600.0;
    return std::pair{ok, "topic train " + fmt(toy->topic_train) + " / dev " + fmt(toy->topic_dev) + " / test " +
                             fmt(toy->topic_test) + "; twin top-1 " + fmt(toy->twin_top1) +
                             "; generator 50-sample AVG.B " + fmt(gen_bleu) + "; " + fmt(secs, 1) + " s"};
  });

  criterion("ablation ordering", [&] {
    if (!toy) throw std::runtime_error("toy models unavailable");
    auto [ok1, d1] = ordering("twin vs twin-diff held-out accuracy", toy->twin_heldout, toy->diff_heldout);
    const auto models = toy->bundle();
    PipelineConfig cfg = PipelineConfig::from_json(config_section(toy->config, "pipeline"));
    const auto turns = eval_turns(toy->data.test);
    GeneratorSource source(*models, cfg.decode, cfg.max_len);
    const auto gold = evaluate_pipeline(turns, *models, cfg, KnowledgeSource::kGold, source);
    const auto rec = evaluate_pipeline(turns, *models, cfg, KnowledgeSource::kRecalled1, source);
    auto [ok2, d2] = ordering("gold vs recalled@1 AVG.B", gold.avg_bleu, rec.avg_bleu);
    return std::pair{ok1 && ok2, d1 + "; " + d2};
  });

  criterion("metric pinning", [] {
    std::vector<std::string> bad;
    if (bleu_avg(split_tokens("the cat sat on the mat"), split_tokens("the cat sat on the mat")) != 100.0)
      bad.push_back("bleu(h,h)");
    const std::vector<Tokens> aaaa{split_tokens("a a a a")};
    const double d2 = distinct2(aaaa);
    if (std::abs(d2 - 33.33) > 0.01) bad.push_back("distinct2 " + fmt(d2, 4));
    // Recorded from tests/oracles/bleu_oracle.py.
    const double hand = bleu_avg(split_tokens("the cat sat"), split_tokens("the cat sat down"));
    if (std::abs(hand - 71.65313105737893) > 1e-9) bad.push_back("hand-worked BLEU " + fmt(hand, 6));
    std::mt19937_64 rng(31);
    std::size_t order_violations = 0;
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<RankedKnowledge> ranked;
      std::vector<std::vector<KnowledgeTriple>> gold;
      for (int s = 0; s < 20; ++s) {
        RankedKnowledge r;
        for (int k = 0, n = 1 + static_cast<int>(rng() % 8); k < n; ++k)
          r.push_back({{"T", "r" + std::to_string(rng() % 6), "x"}, 1.0 - 0.1 * k});
        ranked.push_back(r);
        gold.push_back({{"T", "r" + std::to_string(rng() % 6), "x"}});
      }
      const double a1 = selection_accuracy_at_n(ranked, gold, 1), a3 = selection_accuracy_at_n(ranked, gold, 3),
                   a5 = selection_accuracy_at_n(ranked, gold, 5);
      if (!(a1 <= a3 && a3 <= a5)) ++order_violations;
    }
    if (order_violations) bad.push_back(std::to_string(order_violations) + " @n order violations");
    std::string d = "bleu(h,h)=100, distinct2(a a a a)=" + fmt(d2, 4) + ", hand BLEU " + fmt(hand, 6) +
                    ", @1<=@3<=@5 on 200 random rankings";
    for (const auto& b : bad) d += "; bad " + b;
    return std::pair{bad.empty(), d};
  });

  criterion("end-to-end determinism", [&] {
    if (!toy) throw std::runtime_error("toy models unavailable");
    const auto models = toy->bundle();
    const auto cfg = PipelineConfig::from_json(config_section(toy->config, "pipeline"));
    const auto& topics = models->graph->topics();
    const std::vector<std::string> script{"who directed " + topics[0] + " ?", "what genre is it ?",
                                          "tell me about " + topics[1], "who stars in it ?", "ok , thanks"};
    auto run = [&](std::vector<std::string>& replies, std::vector<nlohmann::json>& traces) {
      SessionManager mgr(models, cfg);
      const auto id = mgr.create_session();
      bool ok = true;
      const auto& all = models->graph->triples();
      for (std::size_t t = 0; t < script.size(); ++t) {
        const auto r = mgr.chat(id, script[t]);
        replies.push_back(r.reply);
        traces.push_back(r.trace.to_json(false));
        ok = ok && mgr.snapshot(id).history.size() == 2 * (t + 1);
        for (const auto& k : r.trace.selected) ok = ok && std::find(all.begin(), all.end(), k.triple) != all.end();
      }
      return ok;
    };
    std::vector<std::string> ra, rb;
    std::vector<nlohmann::json> ta, tb;
    const bool inv = run(ra, ta) && run(rb, tb);
    const bool same = ra == rb && ta == tb;
    return std::pair{inv && same, std::string("5 turns replayed twice: ") + (same ? "identical" : "DIFFERENT") +
                                      " replies and traces; history +2 per turn and selected knowledge in graph: " +
                                      (inv ? "yes" : "NO")};
  });

  criterion("kdconv compatibility (conditional)", [&] {
    const bool real = !kdconv_dir.empty();
    const fs::path root = real ? fs::path(kdconv_dir) : fs::path(KGDIAL_TEST_FIXTURES) / "kdconv_sample";
    bool ok = true;
    std::size_t dialogues = 0, pos = 0, neg = 0, shortfall = 0;
    const auto domains = load_kdconv(root);
    for (const auto& dom : domains)
      for (const auto& [split, corpus] : dom.splits) {
        dialogues += corpus.size();
        const auto kg = build_matching_samples(corpus, dom.graph, 4, 0);
        ok = ok && kg.positives > 0 && kg.negatives + kg.shortfall == 4 * kg.positives;
        pos += kg.positives;
        neg += kg.negatives;
        shortfall += kg.shortfall;
      }
    std::string d = std::to_string(domains.size()) + " domain(s), " + std::to_string(dialogues) +
                    " dialogues parsed; D_kg " + std::to_string(pos) + " pos : " + std::to_string(neg) +
                    " neg, shortfall " + std::to_string(shortfall);
    if (!real) d += " [real KdConv not supplied; checked on the bundled KdConv-format sample]";
    return std::pair{ok, d};
  });

  std::cout << (g_failures ? "FAILED " + std::to_string(g_failures) + " criteria" : std::string("ALL PASS"))
            << std::endl;
  return g_failures ? 1 : 0;
}
