// kgdial command line: data preparation, training, evaluation, REPL and
// HTTP service.
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgdial/datasets.hpp"
#include "kgdial/errors.hpp"
#include "kgdial/evaluation.hpp"
#include "kgdial/http_api.hpp"
#include "kgdial/metrics.hpp"
#include "kgdial/model_bundle.hpp"
#include "kgdial/pipeline.hpp"
#include "kgdial/recall.hpp"
#include "kgdial/recipes.hpp"
#include "kgdial/synthetic.hpp"
#include "kgdial/text.hpp"

namespace fs = std::filesystem;
using namespace kgdial;
using nlohmann::json;

namespace {

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

/// Reuses vocab.json in `dir` when present, otherwise builds and saves it.
Tokenizer vocab_for(const fs::path& dir, const DataSplits& data) {
  const auto path = dir / "vocab.json";
  if (fs::exists(path)) return Tokenizer::load(path);
  auto tok = build_tokenizer(data.train, data.graph);
  tok.save(path);
  return tok;
}

void write_recall_documents(const fs::path& dir, const Corpus& train) {
  write_file(dir / "recall_documents.json", json(dialogue_documents(train)).dump());
}

std::vector<RecallSample> recall_samples(const Corpus& corpus) {
  std::vector<RecallSample> out;
  for (auto& rt : reply_turns(corpus))
    if (!rt.reply->attrs.empty()) out.push_back({std::move(rt.history), rt.reply->attrs.front().head});
  return out;
}

PipelineConfig pipeline_config(const std::string& path, const std::string& algo, int kb) {
  PipelineConfig cfg;
  if (!path.empty()) {
    const auto j = load_config(path);
    cfg = PipelineConfig::from_json(j.contains("pipeline") ? j.at("pipeline") : j);
  }
  if (!algo.empty()) cfg.recall_algo = parse_recall_algorithm(algo);
  if (kb > 0) cfg.top_n_knowledge = static_cast<std::size_t>(kb);
  cfg.validate();
  return cfg;
}

void print_trace(const TurnTrace& t) { std::cout << t.to_json().dump(2) << "\n"; }

std::vector<std::size_t> parse_at(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) out.push_back(std::stoul(trim(part)));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-grounded dialogue pipeline"};
  app.require_subcommand(1);

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "Write the synthetic film benchmark");
  std::string synth_out = "data/synthetic";
  SyntheticOptions synth_opts;
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--seed", synth_opts.seed, "Random seed");
  synth->add_option("--train", synth_opts.train_dialogues, "Training dialogues");
  synth->add_option("--dev", synth_opts.dev_dialogues, "Dev dialogues");
  synth->add_option("--test", synth_opts.test_dialogues, "Test dialogues");

  // build-data
  auto* build = app.add_subcommand("build-data", "Write D_topic, D_kg and D_cg as JSON lines");
  std::string bd_corpus, bd_graph, bd_out;
  std::uint64_t bd_seed = 0;
  int bd_neg = 4;
  build->add_option("--corpus", bd_corpus, "Dialogue corpus")->required();
  build->add_option("--graph", bd_graph, "Knowledge file")->required();
  build->add_option("--out", bd_out, "Output directory")->required();
  build->add_option("--seed", bd_seed, "Sampling seed");
  build->add_option("--neg-ratio", bd_neg, "Negatives per positive in D_kg");

  // recall-bench
  auto* bench = app.add_subcommand("recall-bench", "Recall accuracy for n = 1..n-max as CSV");
  std::string rb_algo = "lexical", rb_corpus, rb_graph, rb_out, rb_docs;
  std::size_t rb_nmax = 50;
  bench->add_option("--algo", rb_algo, "tfidf, lexical or ac")->check(CLI::IsMember({"tfidf", "lexical", "ac"}));
  bench->add_option("--n-max", rb_nmax, "Largest n");
  bench->add_option("--corpus", rb_corpus, "Evaluation corpus")->required();
  bench->add_option("--graph", rb_graph, "Knowledge file")->required();
  bench->add_option("--docs", rb_docs, "Corpus for tf-idf document frequencies (default: --corpus)");
  bench->add_option("--out", rb_out, "CSV output (default: stdout)");

  // train-topic / train-matcher / train-gen share --data, --config, --out
  std::string data_dir = "data/synthetic", config_path = "configs/toy.json";
  auto* tt = app.add_subcommand("train-topic", "Train the topic classifier");
  std::string tt_out = "ckpt/topic.ckpt";
  tt->add_option("--data", data_dir, "Data directory");
  tt->add_option("--config", config_path, "Training config");
  tt->add_option("--out", tt_out, "Checkpoint path");

  auto* tm = app.add_subcommand("train-matcher", "Train the knowledge matcher");
  std::string tm_out = "ckpt/matcher.ckpt", tm_variant = "twin";
  tm->add_option("--variant", tm_variant, "twin, twin-diff or pairwise")
      ->check(CLI::IsMember({"twin", "twin-diff", "pairwise"}));
  tm->add_option("--data", data_dir, "Data directory");
  tm->add_option("--config", config_path, "Training config");
  tm->add_option("--out", tm_out, "Checkpoint path");

  auto* tg = app.add_subcommand("train-gen", "Train the response generator");
  std::string tg_out = "ckpt/generator.ckpt", tg_arch;
  int tg_kb = 0;
  bool tg_nsp = false, tg_share = false, tg_allow_m = false;
  tg->add_option("--arch", tg_arch, "encdec or deconly")->check(CLI::IsMember({"encdec", "deconly"}));
  tg->add_option("--kb", tg_kb, "Knowledge pieces per input (1 or 3)");
  tg->add_flag("--nsp", tg_nsp, "Multi-task training with the NSP head");
  tg->add_flag("--share", tg_share, "Share encoder and decoder embeddings");
  tg->add_flag("--allow-any-m", tg_allow_m, "Permit --kb outside {1, 3}");
  tg->add_option("--data", data_dir, "Data directory");
  tg->add_option("--config", config_path, "Training config");
  tg->add_option("--out", tg_out, "Checkpoint path");

  auto* ta = app.add_subcommand("train-all", "Train every model into a checkpoint directory");
  std::string ta_out = "ckpt";
  ta->add_option("--data", data_dir, "Data directory");
  ta->add_option("--config", config_path, "Training config");
  ta->add_option("--out", ta_out, "Checkpoint directory");

  // Inference commands share --graph, --ckpt-dir and --config.
  std::string graph_path = "data/synthetic/graph.json", ckpt_dir = "ckpt", pcfg_path, algo;
  int kb = 0;
  auto add_inference = [&](CLI::App* c) {
    c->add_option("--graph", graph_path, "Knowledge file");
    c->add_option("--ckpt-dir,--ckpt", ckpt_dir, "Checkpoint directory");
    c->add_option("--config", pcfg_path, "Pipeline config (JSON, or a training config with a pipeline section)");
    c->add_option("--algo", algo, "Recall algorithm")->check(CLI::IsMember({"tfidf", "lexical", "ac"}));
    c->add_option("--kb", kb, "Knowledge pieces for the generator (1 or 3)");
  };

  auto* es = app.add_subcommand("eval-selection", "Knowledge selection accuracy@n");
  std::string es_corpus = "data/synthetic/test.json", es_at = "1,3,5";
  add_inference(es);
  es->add_option("--corpus", es_corpus, "Evaluation corpus");
  es->add_option("--at", es_at, "Comma-separated cut-offs");

  auto* eg = app.add_subcommand("eval-gen", "AVG.B and Dis-2 per knowledge source");
  std::string eg_corpus = "data/synthetic/test.json";
  std::vector<std::string> eg_sources{"gold", "recalled@1", "recalled@3"};
  add_inference(eg);
  eg->add_option("--corpus", eg_corpus, "Evaluation corpus");
  eg->add_option("--source", eg_sources, "gold, recalled@1, recalled@3");

  auto* gen = app.add_subcommand("generate", "Reply to a history given as --utterance options or stdin lines");
  std::vector<std::string> gen_utts;
  bool gen_interactive = false;
  add_inference(gen);
  gen->add_option("--utterance,-u", gen_utts, "History utterance (repeatable, oldest first)");
  gen->add_flag("--interactive", gen_interactive, "Read one utterance per line from stdin");

  auto* dialog = app.add_subcommand("dialog", "Interactive chat; /trace prints the last turn trace");
  add_inference(dialog);

  auto* serve = app.add_subcommand("serve", "HTTP JSON API");
  std::string host = "127.0.0.1";
  int port = 8080;
  add_inference(serve);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      make_synthetic(synth_opts).save(synth_out);
      std::cout << "wrote " << synth_out << "\n";
    } else if (*build) {
      const auto graph = KnowledgeGraph::load(bd_graph);
      const auto corpus = load_corpus(bd_corpus);
      const auto topic = build_topic_samples(corpus, graph);
      const auto kg = build_matching_samples(corpus, graph, bd_neg, bd_seed);
      const auto cg = build_generation_samples(corpus, graph, bd_seed);
      const fs::path out(bd_out);
      write_jsonl(topic.samples, out / "d_topic.jsonl");
      write_jsonl(kg.samples, out / "d_kg.jsonl");
      write_jsonl(cg.samples, out / "d_cg.jsonl");
      const json stats{{"topics", graph.topic_count()},
                       {"triples", graph.triple_count()},
                       {"dialogues", corpus.size()},
                       {"d_topic", {{"samples", topic.samples.size()},
                                    {"skipped_unannotated", topic.skipped_unannotated},
                                    {"skipped_unknown_topic", topic.skipped_unknown_topic}}},
                       {"d_kg", {{"samples", kg.samples.size()},
                                 {"positives", kg.positives},
                                 {"negatives", kg.negatives},
                                 {"shortfall", kg.shortfall}}},
                       {"d_cg", {{"samples", cg.samples.size()},
                                 {"same_dialogue_negatives", cg.same_dialogue_negatives}}}};
      write_file(out / "stats.json", stats.dump(2));
      std::cout << stats.dump(2) << "\n";
    } else if (*bench) {
      const auto graph = KnowledgeGraph::load(rb_graph);
      const auto corpus = load_corpus(rb_corpus);
      const auto docs = dialogue_documents(rb_docs.empty() ? corpus : load_corpus(rb_docs));
      const auto index = RecallIndex::build(graph, parse_recall_algorithm(rb_algo), docs);
      const auto samples = recall_samples(corpus);
      const auto curve = recall_accuracy_curve(index, samples, rb_nmax);
      std::ostringstream csv;
      csv << "algo,n,accuracy_percent,T\n";
      for (std::size_t n = 1; n <= curve.size(); ++n)
        csv << rb_algo << "," << n << "," << curve[n - 1] << "," << samples.size() << "\n";
      if (rb_out.empty()) std::cout << csv.str();
      else write_file(rb_out, csv.str());
    } else if (*tt || *tm || *tg || *ta) {
      const auto data = DataSplits::load(data_dir);
      const auto config = load_config(config_path);
      const fs::path out_dir = *ta ? fs::path(ta_out) : fs::path(*tt ? tt_out : *tm ? tm_out : tg_out).parent_path();
      fs::create_directories(out_dir.empty() ? fs::path(".") : out_dir);
      const auto tok = vocab_for(out_dir, data);
      json report;
      if (*tt || *ta) {
        const auto section = config_section(config, "topic");
        auto model = make_topic_model(section, tok, data.graph);
        const auto ds = build_topic_samples(data.train, data.graph);
        const auto r = train_topic_model(model, tok, ds, train_config(section));
        model.save(*ta ? out_dir / "topic.ckpt" : fs::path(tt_out));
        const auto dev = build_topic_samples(data.dev, data.graph);
        const auto test = build_topic_samples(data.test, data.graph);
        report["topic"] = json::array({{{"split", "train"}, {"accuracy", r.train_accuracy}},
                                       {{"split", "valid"}, {"accuracy", topic_accuracy(model, tok, dev.samples)}},
                                       {{"split", "test"}, {"accuracy", topic_accuracy(model, tok, test.samples)}}});
      }
      if (*tm || *ta) {
        const auto section = config_section(config, "matcher");
        auto m = make_matcher(section, parse_matcher_variant(*ta ? "twin" : tm_variant), tok);
        const auto ds = build_matching_samples(data.train, data.graph, 4, 0);
        train_matcher(m, tok, ds, train_config(section));
        m.save(*ta ? out_dir / "matcher.ckpt" : fs::path(tm_out));
        const auto dev = build_matching_samples(data.dev, data.graph, 4, 1);
        const auto test = build_matching_samples(data.test, data.graph, 4, 2);
        report["matcher"] = {{"variant", to_string(m.variant())},
                             {"train", matcher_accuracy(m, tok, ds)},
                             {"valid", matcher_accuracy(m, tok, dev)},
                             {"test", matcher_accuracy(m, tok, test)},
                             {"train_top1", matcher_top1(m, tok, ds)}};
      }
      if (*tg || *ta) {
        const auto section = config_section(config, "generator");
        std::optional<GenArch> arch;
        if (!tg_arch.empty()) arch = parse_gen_arch(tg_arch);
        std::optional<int> m;
        if (tg_kb > 0) m = tg_kb;
        std::optional<bool> nsp, share;
        if (tg_nsp) nsp = true;
        if (tg_share) share = true;
        auto gcfg = generator_config(section, tok, arch, m, nsp, share);
        if (tg_allow_m) gcfg.allow_any_m = true;
        gcfg.validate();
        auto g = make_generator(gcfg, section);
        const auto ds = build_generation_samples(data.train, data.graph, 0);
        const auto r = train_generator(g, tok, ds, train_config(section));
        g.save(*ta ? out_dir / "generator.ckpt" : fs::path(tg_out));
        report["generator"] = {{"config", gcfg.to_json()}, {"final_loss", r.epoch_loss.back()}, {"samples", r.samples_used}};
      }
      write_recall_documents(out_dir.empty() ? fs::path(".") : out_dir, data.train);
      std::cout << report.dump(2) << "\n";
    } else if (*es || *eg || *gen || *dialog || *serve) {
      auto models = std::make_shared<ModelBundle>(ModelBundle::load(graph_path, ckpt_dir));
      const auto cfg = pipeline_config(pcfg_path, algo, kb);
      if (*es) {
        const auto turns = eval_turns(load_corpus(es_corpus));
        const auto r = evaluate_selection(turns, *models, cfg);
        json acc;
        for (auto n : parse_at(es_at)) {
          std::vector<RankedKnowledge> ranked;
          std::vector<std::vector<KnowledgeTriple>> gold;
          for (const auto& t : turns) {
            ranked.push_back(select_knowledge(*models, t.history, cfg).ranked);
            gold.push_back(t.gold);
          }
          acc[std::to_string(n)] = selection_accuracy_at_n(ranked, gold, n);
        }
        json out = r.to_json();
        out["accuracy"] = acc;
        const std::pair<std::string, SelectionReport> rows[] = {{"pipeline", r}};
        std::cerr << format_selection_table(rows);
        std::cout << out.dump(2) << "\n";
      } else if (*eg) {
        const auto turns = eval_turns(load_corpus(eg_corpus));
        GeneratorSource source(*models, cfg.decode, cfg.max_len);
        std::vector<GenEvalReport> reports;
        json out = json::array();
        for (const auto& s : eg_sources) {
          reports.push_back(evaluate_pipeline(turns, *models, cfg, parse_knowledge_source(s), source));
          out.push_back(reports.back().to_json());
        }
        std::cerr << format_generation_table(reports);
        std::cout << out.dump(2) << "\n";
      } else if (*gen) {
        Session session{"cli", cfg, {}, {}, {}};
        auto reply_to = [&](const std::vector<std::string>& history) {
          const auto sel = select_knowledge(*models, history, cfg);
          std::vector<KnowledgeTriple> knowledge;
          for (const auto& s : sel.selected) knowledge.push_back(s.triple);
          const auto input = build_generator_input(models->tokenizer, knowledge, history,
                                                   std::min(cfg.max_len, models->generator->config().max_len));
          const auto out = models->generator->generate(input.ids, cfg.decode);
          for (const auto& k : knowledge) std::cerr << "knowledge: " << k.text() << "\n";
          return models->tokenizer.decode(out.tokens);
        };
        if (gen_interactive) {
          std::vector<std::string> history;
          for (std::string line; std::getline(std::cin, line);) {
            if (trim(line).empty()) continue;
            history.push_back(line);
            const auto reply = reply_to(history);
            std::cout << reply << std::endl;
            history.push_back(reply);
          }
        } else {
          if (gen_utts.empty()) throw ConfigError("give --utterance or --interactive");
          std::cout << reply_to(gen_utts) << "\n";
        }
      } else if (*dialog) {
        SessionManager sessions(models, cfg);
        auto id = sessions.create_session();
        std::cout << "session " << id << " (/trace, /reset, /quit)\n";
        for (std::string line; std::cout << "> " << std::flush, std::getline(std::cin, line);) {
          const auto text = trim(line);
          if (text.empty()) continue;
          if (text == "/quit") break;
          if (text == "/reset") {
            id = sessions.create_session();
            std::cout << "session " << id << "\n";
            continue;
          }
          if (text == "/trace") {
            const auto s = sessions.snapshot(id);
            if (s.traces.empty()) std::cout << "no turns yet\n";
            else print_trace(s.traces.back());
            continue;
          }
          try {
            std::cout << sessions.chat(id, text).reply << "\n";
          } catch (const StageError& e) {
            std::cout << "error in stage " << e.stage() << ": " << e.what() << "\n";
          }
        }
      } else {
        SessionManager sessions(models, cfg);
        HttpServer server(sessions);
        const int bound = server.bind(host, port);
        if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cout << "listening on http://" << host << ":" << bound << std::endl;
        server.run();
        g_server = nullptr;
      }
    }
  } catch (const StageError& e) {
    std::cerr << "error (stage " << e.stage() << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
