#include "kgdial/kg_store.hpp"

#include <functional>
#include <iostream>

#include "kgdial/errors.hpp"
#include "kgdial/text.hpp"

namespace kgdial {

std::string KnowledgeTriple::text() const { return head + " " + relation + " " + tail; }

std::size_t KnowledgeTripleHash::operator()(const KnowledgeTriple& t) const noexcept {
  std::hash<std::string> h;
  std::size_t seed = h(t.head);
  seed ^= h(t.relation) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  seed ^= h(t.tail) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  return seed;
}

std::string_view to_string(TopicOrigin origin) {
  switch (origin) {
    case TopicOrigin::kRoughRecall: return "rough-recall";
    case TopicOrigin::kMemory: return "memory";
    case TopicOrigin::kExpansion: return "expansion";
  }
  return "unknown";
}

bool TopicSet::contains(std::string_view name) const {
  for (const auto& n : names)
    if (n == name) return true;
  return false;
}

bool TopicSet::add(std::string name) {
  if (contains(name)) return false;
  names.push_back(std::move(name));
  return true;
}

KnowledgeGraph KnowledgeGraph::from_records(std::vector<TopicRecord> records) {
  KnowledgeGraph g;
  if (records.empty()) throw ValidationError("knowledge graph has no topics");
  for (std::size_t r = 0; r < records.size(); ++r) {
    auto& rec = records[r];
    rec.name = trim(rec.name);
    if (rec.name.empty())
      throw ValidationError("record " + std::to_string(r) + ": empty topic name");
    if (!g.topic_ids_.emplace(rec.name, g.topics_.size()).second)
      throw ValidationError("record " + std::to_string(r) + ": duplicate topic name '" +
                            rec.name + "'");
    g.topics_.push_back(rec.name);
    g.entities_.insert(rec.name);
  }
  for (std::size_t r = 0; r < records.size(); ++r) {
    for (std::size_t k = 0; k < records[r].kb.size(); ++k) {
      auto& t = records[r].kb[k];
      t.head = trim(t.head);
      t.relation = trim(t.relation);
      t.tail = trim(t.tail);
      if (t.head.empty() || t.relation.empty() || t.tail.empty())
        throw ValidationError("record " + std::to_string(r) + ", triple " + std::to_string(k) +
                              ": empty field after trim");
      g.head_index_[t.head].push_back(g.triples_.size());
      g.entities_.insert(t.head);
      g.entities_.insert(t.tail);
      g.triples_.push_back(t);
    }
  }
  g.records_ = std::move(records);
  return g;
}

namespace {

KnowledgeTriple triple_from_json(const nlohmann::ordered_json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_string() || !j[1].is_string() ||
      !j[2].is_string())
    throw FormatError(where + ": expected [head, relation, tail] string triple");
  return {j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>()};
}

std::vector<KnowledgeTriple> kb_from_json(const nlohmann::ordered_json& kb,
                                          const std::string& where) {
  if (!kb.is_array()) throw FormatError(where + ": 'kb' must be an array");
  std::vector<KnowledgeTriple> out;
  out.reserve(kb.size());
  for (std::size_t k = 0; k < kb.size(); ++k)
    out.push_back(triple_from_json(kb[k], where + ", triple " + std::to_string(k)));
  return out;
}

}  // namespace

KnowledgeGraph KnowledgeGraph::parse(std::string_view text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("knowledge JSON parse error at line " +
                      std::to_string(line_of_offset(text, e.byte)) + " (byte " +
                      std::to_string(e.byte) + "): " + e.what());
  }
  std::vector<TopicRecord> records;
  if (doc.is_array()) {
    for (std::size_t r = 0; r < doc.size(); ++r) {
      const auto& rec = doc[r];
      const std::string where = "record " + std::to_string(r);
      if (!rec.is_object() || !rec.contains("name") || !rec["name"].is_string())
        throw FormatError(where + ": expected object with string 'name'");
      TopicRecord out{rec["name"].get<std::string>(), {}};
      if (rec.contains("kb")) out.kb = kb_from_json(rec["kb"], where);
      records.push_back(std::move(out));
    }
  } else if (doc.is_object()) {
    std::size_t r = 0;
    for (const auto& [name, kb] : doc.items()) {
      records.push_back({name, kb_from_json(kb, "record " + std::to_string(r) + " ('" + name + "')")});
      ++r;
    }
  } else {
    throw FormatError("knowledge JSON must be an array of records or a topic object");
  }
  return from_records(std::move(records));
}

KnowledgeGraph KnowledgeGraph::load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse(text);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

nlohmann::json KnowledgeGraph::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& rec : records_) {
    nlohmann::json kb = nlohmann::json::array();
    for (const auto& t : rec.kb) kb.push_back({t.head, t.relation, t.tail});
    out.push_back({{"name", rec.name}, {"kb", std::move(kb)}});
  }
  return out;
}

void KnowledgeGraph::save(const std::filesystem::path& path) const {
  write_file(path, to_json().dump(1) + "\n");
}

bool KnowledgeGraph::is_topic(std::string_view name) const {
  return topic_ids_.contains(std::string(name));
}

bool KnowledgeGraph::is_entity(std::string_view name) const {
  return entities_.contains(std::string(name));
}

std::optional<std::size_t> KnowledgeGraph::topic_id(std::string_view name) const {
  auto it = topic_ids_.find(std::string(name));
  if (it == topic_ids_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::size_t> KnowledgeGraph::triples_of(std::string_view name) const {
  auto it = head_index_.find(std::string(name));
  if (it == head_index_.end()) return {};
  return it->second;
}

bool KnowledgeGraph::operator==(const KnowledgeGraph& other) const {
  if (topics_ != other.topics_ || triples_ != other.triples_) return false;
  if (records_.size() != other.records_.size()) return false;
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (records_[i].name != other.records_[i].name || records_[i].kb != other.records_[i].kb)
      return false;
  return true;
}

KnowledgeSet knowledge_for_topics(const KnowledgeGraph& graph, const TopicSet& topics) {
  KnowledgeSet out;
  std::unordered_set<std::size_t> seen_idx;
  std::unordered_set<KnowledgeTriple, KnowledgeTripleHash> seen_content;
  for (const auto& name : topics.names) {
    if (!graph.is_topic(name)) {
      ++out.unknown_topics;
      continue;
    }
    for (std::size_t idx : graph.triples_of(name)) {
      if (!seen_idx.insert(idx).second) continue;
      const auto& t = graph.triples()[idx];
      if (!seen_content.insert(t).second) continue;
      out.triples.push_back(t);
    }
  }
  return out;
}

TopicSet expand_related_topics(const KnowledgeGraph& graph, const TopicSet& topics, int depth) {
  TopicSet out;
  out.origin = TopicOrigin::kExpansion;
  for (const auto& n : topics.names)
    if (graph.is_topic(n)) out.add(n);
  std::vector<std::string> frontier = out.names;
  for (int hop = 0; hop < depth && !frontier.empty(); ++hop) {
    std::vector<std::string> next;
    for (const auto& name : frontier)
      for (std::size_t idx : graph.triples_of(name)) {
        const auto& tail = graph.triples()[idx].tail;
        if (graph.is_topic(tail) && out.add(tail)) next.push_back(tail);
      }
    frontier = std::move(next);
  }
  return out;
}

}  // namespace kgdial
