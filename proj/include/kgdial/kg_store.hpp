#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace kgdial {

struct KnowledgeTriple {
  std::string head;
  std::string relation;
  std::string tail;

  /// "head relation tail", single-space joined. Used as the matcher and
  /// generator input form.
  std::string text() const;

  auto operator<=>(const KnowledgeTriple&) const = default;
};

struct KnowledgeTripleHash {
  std::size_t operator()(const KnowledgeTriple& t) const noexcept;
};

enum class TopicOrigin { kRoughRecall, kMemory, kExpansion };

std::string_view to_string(TopicOrigin origin);

/// Ordered, duplicate-free list of topic names.
struct TopicSet {
  std::vector<std::string> names;
  TopicOrigin origin = TopicOrigin::kRoughRecall;

  bool contains(std::string_view name) const;
  /// Appends `name` unless already present. Returns true if appended.
  bool add(std::string name);
  bool empty() const { return names.empty(); }
  std::size_t size() const { return names.size(); }
};

/// Candidate knowledge (K0). `unknown_topics` counts input topics that were
/// not part of the graph and were skipped.
struct KnowledgeSet {
  std::vector<KnowledgeTriple> triples;
  std::size_t unknown_topics = 0;
};

/// One `{ "name": ..., "kb": [...] }` record of the knowledge file.
struct TopicRecord {
  std::string name;
  std::vector<KnowledgeTriple> kb;
};

/// Immutable after construction; safe for concurrent readers.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  /// Throws ValidationError on duplicate topic names, empty fields or an
  /// empty topic list.
  static KnowledgeGraph from_records(std::vector<TopicRecord> records);

  /// Accepts the documented array form and the KdConv object form
  /// (`{ "topic": [[h, r, t], ...], ... }`). Throws FormatError with a line
  /// or record position on malformed input.
  static KnowledgeGraph parse(std::string_view text);
  static KnowledgeGraph load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;

  const std::vector<std::string>& topics() const { return topics_; }
  const std::vector<KnowledgeTriple>& triples() const { return triples_; }
  const std::vector<TopicRecord>& records() const { return records_; }

  std::size_t topic_count() const { return topics_.size(); }
  std::size_t triple_count() const { return triples_.size(); }

  bool is_topic(std::string_view name) const;
  /// Any registered name: topics, triple heads and tail-only entities.
  bool is_entity(std::string_view name) const;
  std::optional<std::size_t> topic_id(std::string_view name) const;

  /// Indices into triples() whose head equals `name`, in file order.
  std::span<const std::size_t> triples_of(std::string_view name) const;

  bool operator==(const KnowledgeGraph& other) const;

 private:
  std::vector<std::string> topics_;
  std::vector<KnowledgeTriple> triples_;
  std::vector<TopicRecord> records_;
  std::unordered_map<std::string, std::size_t> topic_ids_;
  std::unordered_map<std::string, std::vector<std::size_t>> head_index_;
  std::unordered_set<std::string> entities_;
};

/// K0: triples whose head is one of `topics`, in topic order then file order.
KnowledgeSet knowledge_for_topics(const KnowledgeGraph& graph, const TopicSet& topics);

/// Adds tails of the input topics' triples that are themselves topics.
/// `depth` hops; the default of 1 is not transitive.
TopicSet expand_related_topics(const KnowledgeGraph& graph, const TopicSet& topics,
                               int depth = 1);

}  // namespace kgdial
