#include "kgdial/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace kgdial {

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const Tokens& t, int n) {
  std::map<std::vector<std::string>, int> counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i)
    ++counts[std::vector<std::string>(t.begin() + static_cast<std::ptrdiff_t>(i),
                                      t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

double bleu_n(const Tokens& hypothesis, const Tokens& reference, int n) {
  if (reference.empty()) throw std::invalid_argument("BLEU needs a non-empty reference");
  if (n < 1) throw std::invalid_argument("BLEU order must be positive");
  if (hypothesis.empty()) return 0.0;
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto hyp = ngram_counts(hypothesis, k);
    const auto ref = ngram_counts(reference, k);
    int matched = 0, total = 0;
    for (const auto& [gram, c] : hyp) {
      total += c;
      auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(c, it->second);
    }
    double p;
    if (matched > 0) {
      p = static_cast<double>(matched) / total;
    } else if (k == 1) {
      return 0.0;
    } else {
      p = 1.0 / (static_cast<double>(total) + 1.0);
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(hypothesis.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum / n);
}

double bleu_avg(const Tokens& hypothesis, const Tokens& reference) {
  double s = 0.0;
  for (int n = 1; n <= 4; ++n) s += bleu_n(hypothesis, reference, n);
  return 100.0 * s / 4.0;
}

double corpus_bleu_avg(std::span<const Tokens> hypotheses, std::span<const Tokens> references) {
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("corpus BLEU: hypothesis and reference counts differ");
  if (hypotheses.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) s += bleu_avg(hypotheses[i], references[i]);
  return s / static_cast<double>(hypotheses.size());
}

double distinct2(std::span<const Tokens> hypotheses) {
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t total = 0;
  for (const auto& h : hypotheses)
    for (std::size_t i = 0; i + 1 < h.size(); ++i) {
      seen.emplace(h[i], h[i + 1]);
      ++total;
    }
  if (total == 0) throw std::invalid_argument("distinct-2 needs at least one bigram");
  return 100.0 * static_cast<double>(seen.size()) / static_cast<double>(total);
}

double selection_accuracy_at_n(std::span<const RankedKnowledge> ranked,
                               std::span<const std::vector<KnowledgeTriple>> gold, std::size_t n) {
  if (ranked.size() != gold.size())
    throw std::invalid_argument("selection accuracy: ranking and gold counts differ");
  if (ranked.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const std::size_t limit = std::min(n, ranked[i].size());
    for (std::size_t j = 0; j < limit; ++j)
      if (std::find(gold[i].begin(), gold[i].end(), ranked[i][j].triple) != gold[i].end()) {
        ++hits;
        break;
      }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranked.size());
}

}  // namespace kgdial
