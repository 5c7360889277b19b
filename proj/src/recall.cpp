#include "kgdial/recall.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "kgdial/errors.hpp"
#include "kgdial/text.hpp"

namespace kgdial {

namespace {

std::size_t code_points(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

class Stopwatch {
 public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

std::string_view to_string(RecallAlgorithm algo) {
  switch (algo) {
    case RecallAlgorithm::kTfidf: return "tfidf";
    case RecallAlgorithm::kLexical: return "lexical";
    case RecallAlgorithm::kAhoCorasick: return "ac";
  }
  return "unknown";
}

RecallAlgorithm parse_recall_algorithm(std::string_view name) {
  if (name == "tfidf" || name == "tf-idf") return RecallAlgorithm::kTfidf;
  if (name == "lexical" || name == "lac") return RecallAlgorithm::kLexical;
  if (name == "ac" || name == "aho-corasick") return RecallAlgorithm::kAhoCorasick;
  throw ConfigError("unknown recall algorithm '" + std::string(name) + "'");
}

const StopWords& default_stop_words() {
  static const StopWords words = {
      // English
      "a", "an", "the", "is", "are", "was", "were", "be", "been", "am", "do", "does", "did", "i",
      "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "my", "your",
      "his", "its", "our", "their", "this", "that", "these", "those", "of", "in", "on", "at",
      "to", "for", "with", "by", "from", "and", "or", "but", "so", "not", "no", "yes", "what",
      "who", "when", "where", "which", "how", "why", "have", "has", "had", "can", "could",
      "will", "would", "about", "there", "here", "oh", "ok", "very", "too", "also", "just",
      // punctuation
      ",", ".", "?", "!", ";", ":", "'", "\"", "(", ")", "-",
      // Chinese function characters and punctuation
      "的", "了", "是", "在", "我", "你", "他", "她", "它", "们", "吗", "呢", "啊", "吧", "和",
      "也", "就", "都", "而", "及", "与", "着", "或", "这", "那", "有", "很", "呀", "嗯", "哦",
      "，", "。", "？", "！", "、", "；", "：", "“", "”"};
  return words;
}

StopWords load_stop_words(const std::filesystem::path& path) {
  StopWords out;
  const std::string text = read_file(path);
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = trim(std::string_view(text).substr(start, end - start));
    if (!line.empty() && line[0] != '#') out.insert(std::move(line));
    start = end + 1;
  }
  return out;
}

RecallIndex RecallIndex::build(const KnowledgeGraph& graph, RecallAlgorithm algorithm,
                               std::span<const std::string> documents, StopWords stop_words) {
  return build(graph.topics(), algorithm, documents, std::move(stop_words));
}

RecallIndex RecallIndex::build(std::vector<std::string> dictionary, RecallAlgorithm algorithm,
                               std::span<const std::string> documents, StopWords stop_words) {
  RecallIndex idx;
  idx.algorithm_ = algorithm;
  idx.stop_words_ = std::move(stop_words);
  std::unordered_set<std::string> seen;
  for (auto& name : dictionary)
    if (!split_tokens(name).empty() && seen.insert(name).second)
      idx.dictionary_.push_back(std::move(name));
  if (idx.dictionary_.empty()) throw ValidationError("recall index: empty topic dictionary");

  idx.trie_.emplace_back();
  for (std::size_t t = 0; t < idx.dictionary_.size(); ++t) {
    std::size_t node = 0;
    for (const auto& tok : split_tokens(idx.dictionary_[t])) {
      auto it = idx.trie_[node].children.find(tok);
      if (it == idx.trie_[node].children.end()) {
        idx.trie_.emplace_back();
        it = idx.trie_[node].children.emplace(tok, idx.trie_.size() - 1).first;
      }
      node = it->second;
    }
    if (idx.trie_[node].term < 0) idx.trie_[node].term = static_cast<int>(t);
  }

  if (algorithm == RecallAlgorithm::kAhoCorasick) idx.automaton_ = AhoCorasick(idx.dictionary_);

  if (algorithm == RecallAlgorithm::kTfidf) {
    idx.df_.assign(idx.dictionary_.size(), 0);
    idx.document_count_ = documents.size();
    std::unordered_map<std::string, std::size_t> term_ids;
    for (std::size_t t = 0; t < idx.dictionary_.size(); ++t) term_ids.emplace(idx.dictionary_[t], t);
    for (const auto& doc : documents) {
      std::unordered_set<std::size_t> present;
      for (const auto& seg : idx.segment(doc))
        if (seg.is_topic) present.insert(term_ids.at(seg.text));
      for (std::size_t t : present) ++idx.df_[t];
    }
  }
  return idx;
}

void RecallIndex::require(RecallAlgorithm algo) const {
  if (algorithm_ != algo)
    throw ConfigError("recall index built for " + std::string(to_string(algorithm_)) +
                      ", called as " + std::string(to_string(algo)));
}

std::vector<Segment> RecallIndex::segment(std::string_view text) const {
  const auto tokens = split_tokens(text);
  std::vector<Segment> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t node = 0, best_end = 0;
    int best_term = -1;
    for (std::size_t j = i; j < tokens.size(); ++j) {
      auto it = trie_[node].children.find(tokens[j]);
      if (it == trie_[node].children.end()) break;
      node = it->second;
      if (trie_[node].term >= 0) {
        best_term = trie_[node].term;
        best_end = j + 1;
      }
    }
    if (best_term >= 0) {
      out.push_back({dictionary_[static_cast<std::size_t>(best_term)], true});
      i = best_end;
    } else {
      out.push_back({tokens[i], false});
      ++i;
    }
  }
  return out;
}

std::size_t RecallIndex::document_frequency(std::string_view term) const {
  for (std::size_t t = 0; t < dictionary_.size() && t < df_.size(); ++t)
    if (dictionary_[t] == term) return df_[t];
  return 0;
}

double RecallIndex::idf(std::string_view term) const {
  return std::log((1.0 + static_cast<double>(document_count_)) /
                  (1.0 + static_cast<double>(document_frequency(term)))) +
         1.0;
}

RecallResult RecallIndex::recall(std::string_view history, std::size_t n) const {
  switch (algorithm_) {
    case RecallAlgorithm::kTfidf: return recall_tfidf(history, n);
    case RecallAlgorithm::kLexical: return recall_lexical(history, n);
    case RecallAlgorithm::kAhoCorasick: return recall_aho_corasick(history, n);
  }
  return {};
}

RecallResult RecallIndex::recall_tfidf(std::string_view history, std::size_t n) const {
  require(RecallAlgorithm::kTfidf);
  Stopwatch clock;
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& seg : segment(history)) {
    if (!seg.is_topic && stop_words_.contains(seg.text)) continue;
    ++total;
    if (seg.is_topic) ++counts[seg.text];
  }
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& [term, c] : counts)
    scored.emplace_back(term, static_cast<double>(c) / static_cast<double>(total) * idf(term));
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  RecallResult res;
  res.algorithm = RecallAlgorithm::kTfidf;
  for (std::size_t i = 0; i < scored.size() && i < n; ++i) {
    res.topics.push_back(scored[i].first);
    res.scores.push_back(scored[i].second);
  }
  res.elapsed_ms = clock.elapsed_ms();
  return res;
}

RecallResult RecallIndex::recall_lexical(std::string_view history, std::size_t n) const {
  require(RecallAlgorithm::kLexical);
  Stopwatch clock;
  // Distinct hits ordered by their latest occurrence.
  std::vector<std::string> order;
  for (auto& seg : segment(history)) {
    if (!seg.is_topic) continue;
    auto it = std::find(order.begin(), order.end(), seg.text);
    if (it != order.end()) order.erase(it);
    order.push_back(std::move(seg.text));
  }
  RecallResult res;
  res.algorithm = RecallAlgorithm::kLexical;
  const std::size_t first = order.size() > n ? order.size() - n : 0;
  res.topics.assign(std::make_move_iterator(order.begin() + static_cast<std::ptrdiff_t>(first)),
                    std::make_move_iterator(order.end()));
  res.elapsed_ms = clock.elapsed_ms();
  return res;
}

RecallResult RecallIndex::recall_aho_corasick(std::string_view history, std::size_t n) const {
  require(RecallAlgorithm::kAhoCorasick);
  Stopwatch clock;
  std::unordered_map<std::size_t, std::size_t> last_end;  // pattern -> last end offset
  automaton_.scan(history, [&](const AhoCorasick::Match& m) { last_end[m.pattern] = m.end; });
  std::vector<std::pair<std::size_t, std::size_t>> hits(last_end.begin(), last_end.end());
  const auto& pats = automaton_.patterns();
  std::sort(hits.begin(), hits.end(), [&](const auto& a, const auto& b) {
    const std::size_t la = code_points(pats[a.first]), lb = code_points(pats[b.first]);
    if (la != lb) return la > lb;
    const std::size_t sa = a.second - pats[a.first].size(), sb = b.second - pats[b.first].size();
    if (sa != sb) return sa < sb;
    return a.first < b.first;
  });
  RecallResult res;
  res.algorithm = RecallAlgorithm::kAhoCorasick;
  for (std::size_t i = 0; i < hits.size() && i < n; ++i) res.topics.push_back(pats[hits[i].first]);
  res.elapsed_ms = clock.elapsed_ms();
  return res;
}

std::string join_history(std::span<const std::string> history) {
  std::string out;
  for (const auto& u : history) {
    if (!out.empty()) out += '\n';
    out += u;
  }
  return out;
}

double recall_accuracy(const RecallIndex& index, std::span<const RecallSample> samples,
                       std::size_t n) {
  if (samples.empty()) throw ValidationError("recall_accuracy: no samples (T = 0)");
  std::size_t hits = 0;
  for (const auto& s : samples) {
    const auto res = index.recall(join_history(s.history), n);
    if (std::find(res.topics.begin(), res.topics.end(), s.gold_topic) != res.topics.end()) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::vector<double> recall_accuracy_curve(const RecallIndex& index,
                                          std::span<const RecallSample> samples,
                                          std::size_t n_max) {
  if (samples.empty()) throw ValidationError("recall_accuracy: no samples (T = 0)");
  // hits_at[r] = samples whose gold topic sits at rank r of the top-n_max list.
  std::vector<std::size_t> hits_at(n_max, 0);
  for (const auto& s : samples) {
    const auto res = index.recall(join_history(s.history), n_max);
    // Lexical output is in occurrence order with the most recent last, so
    // its top-n is the tail of the list.
    const auto& topics = res.topics;
    auto it = std::find(topics.begin(), topics.end(), s.gold_topic);
    if (it == topics.end()) continue;
    std::size_t pos = static_cast<std::size_t>(it - topics.begin());
    if (index.algorithm() == RecallAlgorithm::kLexical) pos = topics.size() - 1 - pos;
    ++hits_at[pos];
  }
  std::vector<double> curve(n_max, 0.0);
  std::size_t cumulative = 0;
  for (std::size_t n = 0; n < n_max; ++n) {
    cumulative += hits_at[n];
    curve[n] = 100.0 * static_cast<double>(cumulative) / static_cast<double>(samples.size());
  }
  return curve;
}

}  // namespace kgdial
