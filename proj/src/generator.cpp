#include "kgdial/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kgdial/errors.hpp"
#include "kgdial/nn/checkpoint.hpp"

namespace kgdial {

using nn::Matrix;
using nn::RowVector;
using nn::Var;

namespace {

RowVector log_softmax_row(const RowVector& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return z.array() - lse;
}

int argmax_token(const RowVector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<int> with_bos(std::span<const int> reply) {
  std::vector<int> out{special::kBos};
  out.insert(out.end(), reply.begin(), reply.end());
  return out;
}

}  // namespace

std::string_view to_string(GenArch a) { return a == GenArch::kEncDec ? "encdec" : "deconly"; }

GenArch parse_gen_arch(std::string_view name) {
  if (name == "encdec") return GenArch::kEncDec;
  if (name == "deconly") return GenArch::kDecOnly;
  throw ConfigError("unknown generator architecture '" + std::string(name) + "'");
}

GeneratorInput build_generator_input(const Tokenizer& tok, std::span<const KnowledgeTriple> knowledge,
                                     std::span<const std::string> history, std::size_t max_len) {
  if (knowledge.empty()) throw std::invalid_argument("generator input needs at least one knowledge piece");
  if (history.empty()) throw std::invalid_argument("generator input needs a non-empty history");
  std::vector<std::vector<int>> pieces;
  std::size_t used = 1;  // [CLS]
  for (const auto& k : knowledge) {
    auto ids = tok.encode(k.text());
    ids.push_back(special::kSep);
    pieces.push_back(std::move(ids));
  }
  if (1 + pieces.front().size() > max_len)
    throw ValidationError("knowledge triple '" + knowledge.front().text() + "' needs " +
                          std::to_string(pieces.front().size() + 1) + " tokens but max_len is " +
                          std::to_string(max_len) + "; raise max_len or shorten the triple");
  std::size_t count = 0;
  for (const auto& p : pieces) {
    if (used + p.size() > max_len) break;
    used += p.size();
    ++count;
  }

  GeneratorInput in;
  in.knowledge_used = count;
  in.ids.push_back(special::kCls);
  for (std::size_t i = 0; i < count; ++i) in.ids.insert(in.ids.end(), pieces[i].begin(), pieces[i].end());

  const std::size_t first = history.size() > kHistoryWindow ? history.size() - kHistoryWindow : 0;
  const std::size_t n = history.size();
  std::vector<int> hist;
  for (std::size_t i = first; i < n; ++i) {
    hist.push_back((n - 1 - i) % 2 == 0 ? special::kSpeaker1 : special::kSpeaker2);
    for (int id : tok.encode(history[i])) hist.push_back(id);
  }
  const std::size_t budget = max_len - in.ids.size();
  in.history_tokens_dropped = hist.size() > budget ? hist.size() - budget : 0;
  in.ids.insert(in.ids.end(), hist.begin() + static_cast<std::ptrdiff_t>(in.history_tokens_dropped),
                hist.end());
  return in;
}

void GeneratorConfig::validate() const {
  model.validate();
  if (!allow_any_m && knowledge_count != 1 && knowledge_count != 3)
    throw ConfigError("generator: knowledge count m must be 1 or 3");
  if (knowledge_count < 1) throw ConfigError("generator: knowledge count m must be positive");
  if (share_embeddings && arch == GenArch::kDecOnly)
    throw ConfigError("generator: embedding sharing needs the encoder-decoder architecture");
  const auto positions = static_cast<std::size_t>(model.max_positions);
  const std::size_t needed =
      arch == GenArch::kDecOnly ? max_len + max_reply_len + 1 : std::max(max_len, max_reply_len + 1);
  if (needed > positions)
    throw ConfigError("generator: max_len and max_reply_len exceed max_positions");
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"model", model.to_json()},     {"arch", to_string(arch)},
          {"share", share_embeddings},    {"nsp", nsp},
          {"kb", knowledge_count},        {"allow_any_m", allow_any_m},
          {"max_len", max_len},           {"max_reply_len", max_reply_len}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.model = nn::ModelConfig::from_json(j.at("model"));
  c.arch = parse_gen_arch(j.value("arch", std::string("encdec")));
  c.share_embeddings = j.value("share", c.share_embeddings);
  c.nsp = j.value("nsp", c.nsp);
  c.knowledge_count = j.value("kb", c.knowledge_count);
  c.allow_any_m = j.value("allow_any_m", c.allow_any_m);
  c.max_len = j.value("max_len", c.max_len);
  c.max_reply_len = j.value("max_reply_len", c.max_reply_len);
  return c;
}

nlohmann::json DecodeConfig::to_json() const {
  return {{"mode", mode == Mode::kGreedy ? "greedy" : "beam"},
          {"beam_width", beam_width},
          {"max_new_tokens", max_new_tokens}};
}

DecodeConfig DecodeConfig::from_json(const nlohmann::json& j) {
  DecodeConfig d;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "beam") d.mode = Mode::kBeam;
    else if (s != "greedy") throw ConfigError("decode must be 'greedy' or 'beam'");
    return d;
  }
  const auto mode = j.value("mode", std::string("greedy"));
  if (mode == "beam") d.mode = Mode::kBeam;
  else if (mode != "greedy") throw ConfigError("decode.mode must be 'greedy' or 'beam'");
  d.beam_width = j.value("beam_width", d.beam_width);
  d.max_new_tokens = j.value("max_new_tokens", d.max_new_tokens);
  if (d.beam_width < 1) throw ConfigError("decode.beam_width must be >= 1");
  return d;
}

double mixing_alpha(int nsp_label) { return nsp_label == 1 ? 0.5 : 0.0; }

Var multitask_loss(const Var& lm, const Var& nsp, int nsp_label) {
  const double alpha = mixing_alpha(nsp_label);
  return nn::add(nn::scale(lm, alpha), nn::scale(nsp, 1.0 - alpha));
}

Generator::Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  if (cfg_.arch == GenArch::kEncDec) {
    encoder_ = nn::Encoder(store_, "encoder", cfg_.model, rng);
    if (cfg_.share_embeddings) {
      decoder_ = nn::Decoder(store_, "decoder", cfg_.model, rng, true, encoder_.token_embedding());
    } else {
      decoder_ = nn::Decoder(store_, "decoder", cfg_.model, rng, true);
      decoder_.token_embedding()->value = encoder_.token_embedding()->value;
    }
  } else {
    decoder_ = nn::Decoder(store_, "decoder", cfg_.model, rng, false);
  }
  nsp_head_ = nn::Linear(store_, "nsp", cfg_.model.hidden, 1, rng);
}

GeneratorInput Generator::make_input(const Tokenizer& tok, std::span<const KnowledgeTriple> knowledge,
                                     std::span<const std::string> history) const {
  return build_generator_input(tok, knowledge, history, cfg_.max_len);
}

std::vector<int> Generator::encode_reply(const Tokenizer& tok, std::string_view reply) const {
  auto ids = tok.encode(reply);
  if (ids.size() > cfg_.max_reply_len) ids.resize(cfg_.max_reply_len);
  return ids;
}

Var Generator::decoder_hidden(std::span<const int> ctx, std::span<const int> dec_input, bool train,
                              nn::Rng* rng) const {
  if (cfg_.arch == GenArch::kEncDec) {
    Var memory = encoder_.forward(ctx, {}, train, rng);
    return decoder_.forward(dec_input, memory, train, rng);
  }
  std::vector<int> seq(ctx.begin(), ctx.end());
  seq.insert(seq.end(), dec_input.begin(), dec_input.end());
  Var h = decoder_.forward(seq, nullptr, train, rng);
  return nn::slice_rows(h, static_cast<Eigen::Index>(ctx.size()),
                        static_cast<Eigen::Index>(dec_input.size()));
}

Var Generator::nsp_logit(const Var& hidden, std::size_t position) const {
  return nsp_head_(nn::slice_rows(hidden, static_cast<Eigen::Index>(position), 1));
}

GenLosses Generator::losses(std::span<const int> ctx, std::span<const int> reply, int nsp_label,
                            bool train, nn::Rng* rng) const {
  const auto dec_in = with_bos(reply);
  std::vector<int> targets(reply.begin(), reply.end());
  targets.push_back(special::kEos);
  const Var h = decoder_hidden(ctx, dec_in, train, rng);
  GenLosses out;
  out.lm = nn::cross_entropy(decoder_.logits(h), targets);
  const double label = nsp_label == 1 ? 1.0 : 0.0;
  out.nsp = nn::bce_with_logits(nsp_logit(h, reply.size()), {&label, 1});
  out.total = cfg_.nsp ? multitask_loss(out.lm, out.nsp, nsp_label) : out.lm;
  return out;
}

double Generator::sequence_log_prob(std::span<const int> ctx, std::span<const int> reply,
                                    bool include_eos) const {
  nn::NoGradGuard guard;
  const auto dec_in = with_bos(reply);
  const Matrix lsm = nn::log_softmax(decoder_.logits(decoder_hidden(ctx, dec_in))->value);
  double total = 0.0;
  for (std::size_t i = 0; i < reply.size(); ++i) total += lsm(static_cast<Eigen::Index>(i), reply[i]);
  if (include_eos) total += lsm(static_cast<Eigen::Index>(reply.size()), special::kEos);
  return total;
}

struct Generator::Prefix {
  nn::Decoder::State state;
};

Generator::Prefix Generator::prefill(std::span<const int> ctx) const {
  Prefix p;
  if (cfg_.arch == GenArch::kEncDec) {
    nn::NoGradGuard guard;
    const Matrix memory = encoder_.forward(ctx)->value;
    p.state = decoder_.start(&memory);
  } else {
    p.state = decoder_.start(nullptr);
    for (int t : ctx) decoder_.step(p.state, t);
  }
  return p;
}

std::vector<double> Generator::stepwise_log_probs(std::span<const int> ctx,
                                                  std::span<const int> reply,
                                                  bool include_eos) const {
  auto p = prefill(ctx);
  std::vector<double> out;
  RowVector lsm = log_softmax_row(decoder_.step(p.state, special::kBos));
  for (std::size_t i = 0; i < reply.size(); ++i) {
    out.push_back(lsm(reply[i]));
    if (i + 1 < reply.size() || include_eos) lsm = log_softmax_row(decoder_.step(p.state, reply[i]));
  }
  if (include_eos) out.push_back(lsm(special::kEos));
  return out;
}

GenerationOutput Generator::generate(std::span<const int> ctx, const DecodeConfig& decode) const {
  if (ctx.empty()) throw std::invalid_argument("generate: empty context");
  auto best = greedy(ctx, decode.max_new_tokens);
  if (decode.mode != DecodeConfig::Mode::kBeam) return best;
  // Searches at every width up to beam_width, so a wider beam never returns
  // a worse hypothesis than a narrower one.
  for (int w = 2; w <= decode.beam_width; ++w) {
    auto out = beam(ctx, w, decode.max_new_tokens);
    const bool better = out.finished != best.finished
                            ? out.finished
                            : out.normalized_log_prob > best.normalized_log_prob;
    if (better) best = std::move(out);
  }
  return best;
}

GenerationOutput Generator::greedy(std::span<const int> ctx, std::size_t max_new) const {
  auto p = prefill(ctx);
  const int limit = cfg_.model.max_positions;
  GenerationOutput out;
  RowVector hidden;
  RowVector lsm = log_softmax_row(decoder_.step(p.state, special::kBos, &hidden));
  for (std::size_t i = 0; i < max_new; ++i) {
    const int best = argmax_token(lsm);
    out.token_log_probs.push_back(lsm(best));
    if (best == special::kEos) {
      out.finished = true;
      break;
    }
    out.tokens.push_back(best);
    if (p.state.position >= limit) break;
    lsm = log_softmax_row(decoder_.step(p.state, best, &hidden));
  }
  out.log_prob = std::accumulate(out.token_log_probs.begin(), out.token_log_probs.end(), 0.0);
  out.normalized_log_prob =
      out.token_log_probs.empty() ? 0.0 : out.log_prob / static_cast<double>(out.token_log_probs.size());
  out.nsp_score = sigmoid(nsp_head_.apply(hidden)(0));
  return out;
}

GenerationOutput Generator::beam(std::span<const int> ctx, int width, std::size_t max_new) const {
  struct Hyp {
    nn::Decoder::State state;
    std::vector<int> tokens;
    std::vector<double> lps;
    double lp = 0.0;
    RowVector hidden;
    RowVector next;
  };
  struct Candidate {
    double score;
    std::size_t hyp;
    int token;
  };
  const int limit = cfg_.model.max_positions;
  std::vector<Hyp> live(1);
  live[0].state = prefill(ctx).state;
  live[0].next = log_softmax_row(decoder_.step(live[0].state, special::kBos, &live[0].hidden));
  std::vector<GenerationOutput> done;
  auto finish = [&](const Hyp& h, std::vector<double> lps, bool finished) {
    GenerationOutput o;
    o.tokens = h.tokens;
    o.token_log_probs = std::move(lps);
    o.log_prob = std::accumulate(o.token_log_probs.begin(), o.token_log_probs.end(), 0.0);
    o.normalized_log_prob =
        o.token_log_probs.empty() ? 0.0 : o.log_prob / static_cast<double>(o.token_log_probs.size());
    o.nsp_score = sigmoid(nsp_head_.apply(h.hidden)(0));
    o.finished = finished;
    return o;
  };

  std::vector<GenerationOutput> unfinished;
  for (std::size_t step = 0; step < max_new && !live.empty(); ++step) {
    const std::size_t slots = static_cast<std::size_t>(width) - done.size();
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      std::vector<int> ids(static_cast<std::size_t>(live[h].next.size()));
      std::iota(ids.begin(), ids.end(), 0);
      const std::size_t k = std::min(slots, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                        [&](int a, int b) {
                          const double va = live[h].next(a), vb = live[h].next(b);
                          return va > vb || (va == vb && a < b);
                        });
      for (std::size_t i = 0; i < k; ++i)
        cands.push_back({live[h].lp + live[h].next(ids[i]), h, ids[i]});
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    if (cands.size() > slots) cands.resize(slots);

    std::vector<Hyp> next_live;
    for (const auto& c : cands) {
      const Hyp& h = live[c.hyp];
      auto lps = h.lps;
      lps.push_back(h.next(c.token));
      if (c.token == special::kEos) {
        done.push_back(finish(h, std::move(lps), true));
        continue;
      }
      Hyp n;
      n.state = h.state;
      n.tokens = h.tokens;
      n.tokens.push_back(c.token);
      n.lps = std::move(lps);
      n.lp = c.score;
      if (n.state.position >= limit) {
        n.hidden = h.hidden;
        unfinished.push_back(finish(n, n.lps, false));
        continue;
      }
      n.next = log_softmax_row(decoder_.step(n.state, c.token, &n.hidden));
      next_live.push_back(std::move(n));
    }
    live = std::move(next_live);
    if (done.size() >= static_cast<std::size_t>(width)) break;
  }
  for (const auto& h : live) unfinished.push_back(finish(h, h.lps, false));

  const auto& pool = done.empty() ? unfinished : done;
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (pool[i].normalized_log_prob > pool[best].normalized_log_prob) best = i;
  return pool[best];
}

void Generator::save(const std::filesystem::path& path) const {
  nn::Checkpoint::from_store("generator", cfg_.to_json(), store_).save(path);
}

Generator Generator::load(const std::filesystem::path& path) {
  const auto ckpt = nn::Checkpoint::load(path);
  if (ckpt.kind != "generator") throw FormatError(path.string() + ": not a generator checkpoint");
  Generator g(GeneratorConfig::from_json(ckpt.config));
  ckpt.restore(g.store_);
  return g;
}

std::vector<KnowledgeTriple> sample_knowledge(const GenSample& s, int m) {
  std::vector<KnowledgeTriple> out;
  const auto want = static_cast<std::size_t>(m);
  for (const auto& k : s.knowledge)
    if (out.size() < want) out.push_back(k);
  for (const auto& k : s.distractors)
    if (out.size() < want) out.push_back(k);
  return out;
}

GeneratorReport train_generator(Generator& g, const Tokenizer& tok, const GenDataset& data,
                                const nn::TrainConfig& cfg) {
  cfg.validate();
  struct Prepared {
    std::vector<int> ctx, reply;
    int label;
  };
  std::vector<Prepared> items;
  for (const auto& s : data.samples) {
    if (!g.config().nsp && s.nsp_label != 1) continue;
    items.push_back({g.make_input(tok, sample_knowledge(s, g.config().knowledge_count), s.history).ids,
                     g.encode_reply(tok, s.reply), s.nsp_label});
  }
  if (items.empty()) throw ValidationError("generation dataset is empty");
  nn::Rng rng(cfg.seed);
  nn::AdamW opt(g.params(), cfg);
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t batches = (items.size() + bs - 1) / bs;
  const long total = static_cast<long>(batches) * cfg.epochs;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  GeneratorReport report;
  report.samples_used = items.size();
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * bs, hi = std::min(items.size(), lo + bs);
      auto loss_fn = [&]() {
        Var sum;
        for (std::size_t i = lo; i < hi; ++i) {
          const auto& it = items[order[i]];
          Var l = g.losses(it.ctx, it.reply, it.label, true, &rng).total;
          sum = sum ? nn::add(sum, l) : l;
        }
        return nn::scale(sum, 1.0 / static_cast<double>(hi - lo));
      };
      epoch_loss += nn::train_step(g.params(), opt, loss_fn, step++, total, cfg.lr);
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  report.steps = static_cast<std::size_t>(step);
  return report;
}

}  // namespace kgdial
