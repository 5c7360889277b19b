#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "kgdial/corpus.hpp"
#include "kgdial/datasets.hpp"
#include "kgdial/errors.hpp"
#include "kgdial/synthetic.hpp"
#include "kgdial/text.hpp"
#include "kgdial/tokenizer.hpp"
#include "support.hpp"

using namespace kgdial;
using kgtest::msg;
using kgtest::triple;

TEST_CASE("tokenizer splits CJK characters and punctuation") {
  CHECK(split_tokens("hello, world!") == std::vector<std::string>{"hello", ",", "world", "!"});
  CHECK(split_tokens("我喜欢 Inception 2") ==
        std::vector<std::string>{"我", "喜", "欢", "Inception", "2"});
  CHECK(join_tokens(split_tokens("我喜欢")) == "我喜欢");
  CHECK(join_tokens(split_tokens("the  film ,")) == "the film ,");
  CHECK(split_tokens("   ").empty());
}

TEST_CASE("vocabulary order and determinism") {
  std::vector<std::string> corpus{"b a a", "c a b"};
  auto tok = Tokenizer::build(corpus);
  CHECK(tok.size() == special::kCount + 3);
  CHECK(tok.token(special::kCount) == "a");
  CHECK(tok.token(special::kCount + 1) == "b");
  CHECK(tok.token(special::kCount + 2) == "c");
  CHECK(tok.token(special::kSep) == "[SEP]");
  CHECK(Tokenizer::build(corpus).to_json_string() == tok.to_json_string());

  auto pruned = Tokenizer::build(corpus, 2);
  CHECK(pruned.id("c") == special::kUnk);
  CHECK(pruned.id("b") != special::kUnk);
  CHECK_THROWS_AS(Tokenizer::build(std::vector<std::string>{}), ConfigError);

  auto back = Tokenizer::from_json_string(tok.to_json_string());
  CHECK(back == tok);
  CHECK(tok.decode(tok.encode("a b c zzz")) == "a b c");
  CHECK(tok.decode(tok.encode("a zzz"), false) == "a [UNK]");
}

TEST_CASE("history keeps only the last ten utterances") {
  std::vector<std::string> corpus;
  std::vector<std::string> history;
  for (int i = 0; i < 12; ++i) history.push_back("u" + std::to_string(i));
  auto tok = Tokenizer::build(history);
  auto ids = encode_history(tok, history);
  CHECK(ids.size() == 1 + 10 * 2);
  CHECK(ids.front() == special::kCls);
  CHECK(std::find(ids.begin(), ids.end(), tok.id("u0")) == ids.end());
  CHECK(std::find(ids.begin(), ids.end(), tok.id("u1")) == ids.end());
  CHECK(ids[1] == tok.id("u2"));
  CHECK(ids.back() == special::kSep);

  std::vector<std::string> one{"u5"};
  CHECK(encode_history(tok, one) == std::vector<int>{special::kCls, tok.id("u5"), special::kSep});
}

TEST_CASE("over-long history keeps the newest tokens") {
  // Three utterances totalling 450 word tokens.
  std::vector<std::string> words;
  for (int i = 0; i < 450; ++i) words.push_back("w" + std::to_string(i));
  auto tok = Tokenizer::build(words);
  std::vector<std::string> history(3);
  for (int i = 0; i < 450; ++i) history[static_cast<std::size_t>(i / 150)] += words[static_cast<std::size_t>(i)] + " ";
  auto ids = encode_history(tok, history);
  REQUIRE(ids.size() == 400);
  // Oracle: full [CLS] u1 [SEP] u2 [SEP] u3 [SEP], keep [CLS] plus the last 399.
  std::vector<int> full;
  for (const auto& u : history) {
    for (int id : tok.encode(u)) full.push_back(id);
    full.push_back(special::kSep);
  }
  std::vector<int> expect{special::kCls};
  expect.insert(expect.end(), full.end() - 399, full.end());
  CHECK(ids == expect);
}

TEST_CASE("final utterance survives truncation for random histories") {
  std::vector<std::string> vocab;
  for (int i = 0; i < 60; ++i) vocab.push_back("t" + std::to_string(i));
  auto tok = Tokenizer::build(vocab);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> history(1 + rng() % 15);
    for (auto& u : history)
      for (std::size_t k = 0, n = 1 + rng() % 40; k < n; ++k) u += vocab[rng() % 60] + " ";
    const std::size_t max_len = 20 + rng() % 80;
    auto ids = encode_history(tok, history, 10, max_len);
    CHECK(ids.size() <= max_len);
    auto last = tok.encode(history.back());
    last.push_back(special::kSep);
    if (last.size() + 1 <= max_len) CHECK(std::equal(last.rbegin(), last.rend(), ids.rbegin()));
  }
}

TEST_CASE("topic samples: one per annotated reply, shared topics share labels") {
  auto g = kgtest::film_graph();
  Dialogue d;
  d.messages.push_back(msg("hi"));
  for (int i = 0; i < 18; ++i) d.messages.push_back(msg("about Alpha", {triple("Alpha", "genre", "drama")}));
  Corpus c{d};
  auto ds = build_topic_samples(c, g);
  CHECK(ds.samples.size() == 18);
  CHECK(std::all_of(ds.samples.begin(), ds.samples.end(),
                    [&](const TopicSample& s) { return s.label == ds.samples[0].label; }));
  CHECK(ds.samples.back().history.size() == kHistoryWindow);

  c[0].messages[3].attrs.clear();
  c[0].messages[4].attrs = {triple("Nope", "r", "x")};
  auto skipped = build_topic_samples(c, g);
  CHECK(skipped.samples.size() == 16);
  CHECK(skipped.skipped_unannotated == 1);
  CHECK(skipped.skipped_unknown_topic == 1);
}

TEST_CASE("matching samples: ratio, ordering and shortfall") {
  std::vector<TopicRecord> records(1);
  records[0].name = "A";
  for (int i = 0; i < 11; ++i) records[0].kb.push_back(triple("A", "r" + std::to_string(i), "x"));
  auto big = KnowledgeGraph::from_records(records);
  Corpus c{{{msg("tell me about A"), msg("A r0 x", {triple("A", "r0", "x")})}, "d"}};

  auto ds = build_matching_samples(c, big, 4, 1);
  REQUIRE(ds.samples.size() == 5);
  CHECK(ds.samples[0].label == 1);
  for (int i = 1; i < 5; ++i) CHECK(ds.samples[static_cast<std::size_t>(i)].label == 0);
  CHECK(ds.shortfall == 0);
  std::set<KnowledgeTriple> distinct;
  for (const auto& s : ds.samples) distinct.insert(s.knowledge);
  CHECK(distinct.size() == 5);

  records[0].kb.resize(3);
  auto small = KnowledgeGraph::from_records(records);
  auto short_ds = build_matching_samples(c, small, 4, 1);
  CHECK(short_ds.samples.size() == 3);
  CHECK(short_ds.shortfall == 2);

  auto again = build_matching_samples(c, big, 4, 1);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) CHECK(again.samples[i].knowledge == ds.samples[i].knowledge);
}

TEST_CASE("matching negatives prefer the positive's own topic") {
  auto g = kgtest::film_graph();
  Corpus c{{{msg("who directed Alpha ?"), msg("Ann Lee", {triple("Alpha", "director", "Ann Lee")})}, "d"}};
  auto ds = build_matching_samples(c, g, 4, 3);
  REQUIRE(ds.samples.size() == 5);
  CHECK(ds.samples[1].knowledge.head == "Alpha");
  CHECK(ds.samples[2].knowledge.head == "Alpha");
  CHECK(ds.samples[3].knowledge.head != "Alpha");
}

TEST_CASE("matching ratio holds on the synthetic corpus") {
  auto syn = make_synthetic({});
  auto ds = build_matching_samples(syn.train, syn.graph, 4, 0);
  CHECK(ds.positives * 4 == ds.negatives + ds.shortfall);
  for (const auto& s : ds.samples)
    if (s.label == 0) {
      bool gold = false;
      for (const auto& t : ds.samples)
        if (t.group == s.group && t.label == 1 && t.knowledge == s.knowledge) gold = true;
      CHECK_FALSE(gold);
    }
}

TEST_CASE("generation samples pair each positive with one negative") {
  auto syn = make_synthetic({});
  auto ds = build_generation_samples(syn.train, syn.graph, 5);
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < ds.samples.size(); i += 2) {
    const auto& p = ds.samples[i];
    const auto& n = ds.samples[i + 1];
    CHECK(p.nsp_label == 1);
    CHECK(n.nsp_label == 0);
    CHECK(n.reply != p.reply);
    CHECK(n.history == p.history);
    ++pos;
    ++neg;
  }
  CHECK(pos == neg);
  CHECK(ds.same_dialogue_negatives == 0);
  auto again = build_generation_samples(syn.train, syn.graph, 5);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) CHECK(again.samples[i].reply == ds.samples[i].reply);
}

TEST_CASE("generation negatives come from other dialogues") {
  auto c = kgtest::film_corpus();
  auto ds = build_generation_samples(c, kgtest::film_graph(), 2);
  for (const auto& s : ds.samples) {
    if (s.nsp_label != 0) continue;
    const auto& own = c[s.dialogue].messages;
    bool from_own = false;
    for (const auto& m : own) from_own = from_own || m.text == s.reply;
    CHECK_FALSE(from_own);
  }
}

TEST_CASE("single-dialogue corpus flags same-dialogue negatives") {
  auto c = kgtest::film_corpus();
  c.resize(1);
  auto ds = build_generation_samples(c, kgtest::film_graph(), 2);
  CHECK(ds.samples.size() == 4);
  CHECK(ds.same_dialogue_negatives == 2);
  CHECK(ds.samples[1].same_dialogue_negative);
}

TEST_CASE("corpus parsing and jsonl output") {
  auto c = parse_corpus(
      R"([{"messages": [{"message": "hi"}, {"message": "Alpha is a drama", "attrs": [{"name": "Alpha", "attrname": "genre", "attrvalue": "drama"}]}]}])");
  REQUIRE(c.size() == 1);
  CHECK(c[0].messages[1].attrs[0] == triple("Alpha", "genre", "drama"));
  CHECK_THROWS_AS(parse_corpus(R"([{"messages": [{"text": "x"}]}])"), FormatError);
  CHECK_THROWS_AS(parse_corpus("[{"), FormatError);

  auto dir = kgtest::scratch_dir("jsonl");
  auto ds = build_topic_samples(kgtest::film_corpus(), kgtest::film_graph());
  write_jsonl(ds.samples, dir / "t.jsonl");
  std::ifstream in(dir / "t.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == ds.samples.size());
}
