#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "kgdial/metrics.hpp"
#include "kgdial/text.hpp"
#include "support.hpp"

using namespace kgdial;

namespace {

Tokens toks(std::string_view s) { return split_tokens(s); }

}  // namespace

TEST_CASE("BLEU of a sentence against itself is 100") {
  for (auto s : {"a", "the cat", "the cat sat", "the cat sat on the mat today"})
    CHECK(bleu_avg(toks(s), toks(s)) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("BLEU matches values frozen from an independent implementation") {
  // Frozen from tests/oracles/bleu_oracle.py.
  CHECK(bleu_avg(toks("the cat sat"), toks("the cat sat down")) ==
        doctest::Approx(71.65313105737893).epsilon(1e-12));
  CHECK(bleu_avg(toks("the the the"), toks("the cat")) == doctest::Approx(38.343246313960854).epsilon(1e-12));
  CHECK(bleu_avg(toks("dog runs"), toks("the cat sat")) == 0.0);
}

TEST_CASE("BLEU edge cases") {
  CHECK(bleu_avg(Tokens{}, toks("a b")) == 0.0);
  CHECK_THROWS_AS(bleu_avg(toks("a b"), Tokens{}), std::invalid_argument);
  CHECK(bleu_n(toks("a b c"), toks("a b c"), 1) == 1.0);
  std::vector<Tokens> hyp{toks("a b"), toks("x y")}, ref{toks("a b"), toks("a b")};
  CHECK(corpus_bleu_avg(hyp, ref) == doctest::Approx(50.0));
}

TEST_CASE("distinct-2 values") {
  std::vector<Tokens> one{toks("a a a a")};
  CHECK(distinct2(one) == doctest::Approx(100.0 / 3.0).epsilon(1e-9));
  std::vector<Tokens> all_distinct{toks("a b c d")};
  CHECK(distinct2(all_distinct) == 100.0);
  std::vector<Tokens> none{toks("a"), Tokens{}};
  CHECK_THROWS_AS(distinct2(none), std::invalid_argument);
}

TEST_CASE("distinct-2 matches a brute-force count and ignores order") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> vocab{"a", "b", "c"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tokens> hyps(1 + rng() % 5);
    for (auto& h : hyps)
      for (std::size_t k = 0, n = 2 + rng() % 6; k < n; ++k) h.push_back(vocab[rng() % 3]);
    std::set<std::pair<std::string, std::string>> uniq;
    std::size_t total = 0;
    for (const auto& h : hyps)
      for (std::size_t i = 0; i + 1 < h.size(); ++i, ++total) uniq.insert({h[i], h[i + 1]});
    const double expect = 100.0 * static_cast<double>(uniq.size()) / static_cast<double>(total);
    CHECK(distinct2(hyps) == doctest::Approx(expect).epsilon(1e-12));
    std::shuffle(hyps.begin(), hyps.end(), rng);
    CHECK(distinct2(hyps) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("selection accuracy is monotone in n") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RankedKnowledge> ranked;
    std::vector<std::vector<KnowledgeTriple>> gold;
    for (int s = 0; s < 20; ++s) {
      RankedKnowledge r;
      for (int k = 0, n = 1 + static_cast<int>(rng() % 7); k < n; ++k)
        r.push_back({kgtest::triple("T", "r" + std::to_string(rng() % 6), "x"), 1.0 - 0.1 * k});
      ranked.push_back(r);
      gold.push_back({kgtest::triple("T", "r" + std::to_string(rng() % 6), "x")});
    }
    const double a1 = selection_accuracy_at_n(ranked, gold, 1);
    const double a3 = selection_accuracy_at_n(ranked, gold, 3);
    const double a5 = selection_accuracy_at_n(ranked, gold, 5);
    CHECK(a1 <= a3);
    CHECK(a3 <= a5);
  }
  std::vector<RankedKnowledge> r{{{kgtest::triple("A", "r", "x"), 0.9}, {kgtest::triple("A", "s", "y"), 0.1}}};
  std::vector<std::vector<KnowledgeTriple>> g{{kgtest::triple("A", "s", "y")}};
  CHECK(selection_accuracy_at_n(r, g, 1) == 0.0);
  CHECK(selection_accuracy_at_n(r, g, 2) == 100.0);
}
