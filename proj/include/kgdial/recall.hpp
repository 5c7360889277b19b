#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgdial/aho_corasick.hpp"
#include "kgdial/kg_store.hpp"

namespace kgdial {

enum class RecallAlgorithm { kTfidf, kLexical, kAhoCorasick };

std::string_view to_string(RecallAlgorithm algo);
/// Accepts "tfidf", "lexical" and "ac" / "aho-corasick".
RecallAlgorithm parse_recall_algorithm(std::string_view name);

using StopWords = std::unordered_set<std::string>;
const StopWords& default_stop_words();
/// One word per line; blank lines and '#' comments ignored.
StopWords load_stop_words(const std::filesystem::path& path);

struct RecallResult {
  std::vector<std::string> topics;
  /// tf-idf scores, parallel to `topics`; empty for the other algorithms.
  std::vector<double> scores;
  RecallAlgorithm algorithm = RecallAlgorithm::kLexical;
  double elapsed_ms = 0.0;
};

/// Output unit of the dictionary longest-match segmenter.
struct Segment {
  std::string text;
  bool is_topic = false;
};

/// Model-free topic recall over a dictionary of graph topic names.
/// Immutable after build; recall calls are safe to run concurrently.
class RecallIndex {
 public:
  /// `documents` feed the tf-idf document frequencies and are ignored by the
  /// other algorithms. Throws ValidationError on an empty dictionary.
  static RecallIndex build(const KnowledgeGraph& graph, RecallAlgorithm algorithm,
                           std::span<const std::string> documents = {},
                           StopWords stop_words = default_stop_words());
  static RecallIndex build(std::vector<std::string> dictionary, RecallAlgorithm algorithm,
                           std::span<const std::string> documents = {},
                           StopWords stop_words = default_stop_words());

  RecallAlgorithm algorithm() const { return algorithm_; }
  const std::vector<std::string>& dictionary() const { return dictionary_; }

  /// Dispatches on algorithm().
  RecallResult recall(std::string_view history, std::size_t n) const;

  /// Top-n topics by tf * idf, idf = ln((1 + |D|) / (1 + df)) + 1; ties
  /// lexicographic.
  RecallResult recall_tfidf(std::string_view history, std::size_t n) const;
  /// The last n distinct longest-match hits, in order of last occurrence.
  RecallResult recall_lexical(std::string_view history, std::size_t n) const;
  /// All automaton hits, longest first; equal lengths by earlier last occurrence.
  RecallResult recall_aho_corasick(std::string_view history, std::size_t n) const;

  /// Dictionary-aware longest match over split_tokens(text).
  std::vector<Segment> segment(std::string_view text) const;

  std::size_t document_count() const { return document_count_; }
  std::size_t document_frequency(std::string_view term) const;
  double idf(std::string_view term) const;
  const AhoCorasick& automaton() const { return automaton_; }

 private:
  struct TrieNode {
    std::unordered_map<std::string, std::size_t> children;
    int term = -1;
  };

  void require(RecallAlgorithm algo) const;

  RecallAlgorithm algorithm_ = RecallAlgorithm::kLexical;
  std::vector<std::string> dictionary_;
  std::vector<TrieNode> trie_;
  AhoCorasick automaton_;
  std::vector<std::size_t> df_;  // parallel to dictionary_
  std::size_t document_count_ = 0;
  StopWords stop_words_;
};

/// History text handed to recall: the utterances joined by newlines.
std::string join_history(std::span<const std::string> history);

struct RecallSample {
  std::vector<std::string> history;
  std::string gold_topic;
};

/// Percentage of samples whose top-n recall contains the gold topic.
/// Throws ValidationError for an empty sample set.
double recall_accuracy(const RecallIndex& index, std::span<const RecallSample> samples,
                       std::size_t n);

/// recall_accuracy for n = 1..n_max from one recall per sample; element
/// n-1 holds accuracy at n.
std::vector<double> recall_accuracy_curve(const RecallIndex& index,
                                          std::span<const RecallSample> samples,
                                          std::size_t n_max);

}  // namespace kgdial
