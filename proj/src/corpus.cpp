#include "kgdial/corpus.hpp"

#include "kgdial/errors.hpp"
#include "kgdial/text.hpp"

namespace kgdial {

Corpus parse_corpus(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("dialogue JSON parse error at line " +
                      std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
  }
  if (!doc.is_array()) throw FormatError("dialogue JSON must be an array");
  Corpus corpus;
  corpus.reserve(doc.size());
  for (std::size_t d = 0; d < doc.size(); ++d) {
    const auto& dj = doc[d];
    const std::string where = "dialogue " + std::to_string(d);
    if (!dj.is_object() || !dj.contains("messages") || !dj["messages"].is_array())
      throw FormatError(where + ": expected object with 'messages' array");
    Dialogue dlg;
    if (dj.contains("name") && dj["name"].is_string()) dlg.name = dj["name"].get<std::string>();
    for (std::size_t m = 0; m < dj["messages"].size(); ++m) {
      const auto& mj = dj["messages"][m];
      if (!mj.is_object() || !mj.contains("message") || !mj["message"].is_string())
        throw FormatError(where + ", message " + std::to_string(m) + ": missing 'message' string");
      Message msg{mj["message"].get<std::string>(), {}};
      if (mj.contains("attrs")) {
        for (const auto& a : mj["attrs"]) {
          if (!a.contains("name") || !a.contains("attrname") || !a.contains("attrvalue"))
            throw FormatError(where + ", message " + std::to_string(m) +
                              ": attr needs name/attrname/attrvalue");
          auto field = [](const nlohmann::json& v) {
            return v.is_string() ? v.get<std::string>() : v.dump();
          };
          msg.attrs.push_back({trim(field(a["name"])), trim(field(a["attrname"])),
                               trim(field(a["attrvalue"]))});
        }
      }
      dlg.messages.push_back(std::move(msg));
    }
    corpus.push_back(std::move(dlg));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_corpus(text);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

nlohmann::json corpus_to_json(const Corpus& corpus) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : corpus) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : d.messages) {
      nlohmann::json mj = {{"message", m.text}};
      if (!m.attrs.empty()) {
        nlohmann::json attrs = nlohmann::json::array();
        for (const auto& a : m.attrs)
          attrs.push_back({{"name", a.head}, {"attrname", a.relation}, {"attrvalue", a.tail}});
        mj["attrs"] = std::move(attrs);
      }
      msgs.push_back(std::move(mj));
    }
    nlohmann::json dj = {{"messages", std::move(msgs)}};
    if (!d.name.empty()) dj["name"] = d.name;
    out.push_back(std::move(dj));
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, corpus_to_json(corpus).dump(1) + "\n");
}

std::vector<std::string> dialogue_documents(const Corpus& corpus) {
  std::vector<std::string> docs;
  docs.reserve(corpus.size());
  for (const auto& d : corpus) {
    std::string doc;
    for (const auto& m : d.messages) {
      doc += m.text;
      doc += '\n';
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<std::string> vocabulary_texts(const Corpus& corpus, const KnowledgeGraph& graph) {
  std::vector<std::string> texts;
  for (const auto& d : corpus)
    for (const auto& m : d.messages) texts.push_back(m.text);
  for (const auto& t : graph.triples()) texts.push_back(t.text());
  for (const auto& name : graph.topics()) texts.push_back(name);
  return texts;
}

}  // namespace kgdial
