#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kgdial/kg_store.hpp"
#include "kgdial/matcher.hpp"

namespace kgdial {

using Tokens = std::vector<std::string>;

/// Sentence BLEU-n (cumulative, uniform weights) in [0, 1]: clipped n-gram
/// precisions, brevity penalty exp(1 - r/c) when c < r. A zero precision
/// of order k >= 2 is add-one smoothed to 1 / (count_k + 1); a zero
/// unigram precision yields 0.
double bleu_n(const Tokens& hypothesis, const Tokens& reference, int n);

/// Mean of BLEU-1..4, percent scale. Empty hypothesis gives 0; an empty
/// reference throws std::invalid_argument.
double bleu_avg(const Tokens& hypothesis, const Tokens& reference);

/// Mean of bleu_avg over aligned pairs.
double corpus_bleu_avg(std::span<const Tokens> hypotheses, std::span<const Tokens> references);

/// Distinct bigrams over all bigrams, pooled across hypotheses, percent
/// scale. Throws std::invalid_argument when there is no bigram.
double distinct2(std::span<const Tokens> hypotheses);

/// Percentage of samples whose first n ranked triples contain a gold triple.
double selection_accuracy_at_n(std::span<const RankedKnowledge> ranked,
                               std::span<const std::vector<KnowledgeTriple>> gold, std::size_t n);

}  // namespace kgdial
