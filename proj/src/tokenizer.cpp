#include "kgdial/tokenizer.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "kgdial/errors.hpp"
#include "kgdial/text.hpp"

namespace kgdial {

namespace {

const std::vector<std::string>& special_names() {
  static const std::vector<std::string> names = {"[PAD]", "[UNK]", "[CLS]",      "[SEP]",
                                                 "[BOS]", "[EOS]", "[speaker1]", "[speaker2]"};
  return names;
}

constexpr int kVocabVersion = 1;

}  // namespace

Tokenizer Tokenizer::build(std::span<const std::string> corpus, int min_count) {
  if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus)
    for (auto& t : split_tokens(text)) ++counts[std::move(t)];

  std::vector<std::pair<std::string, std::size_t>> entries;
  for (auto& [tok, c] : counts)
    if (c >= static_cast<std::size_t>(std::max(min_count, 1))) entries.emplace_back(tok, c);
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Tokenizer tok;
  tok.tokens_ = special_names();
  for (auto& [t, c] : entries)
    if (std::find(tok.tokens_.begin(), tok.tokens_.begin() + special::kCount, t) ==
        tok.tokens_.begin() + special::kCount)
      tok.tokens_.push_back(t);
  tok.index();
  return tok;
}

void Tokenizer::index() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
}

std::string Tokenizer::to_json_string() const {
  nlohmann::json j = {{"version", kVocabVersion}, {"tokens", tokens_}};
  return j.dump(0) + "\n";
}

Tokenizer Tokenizer::from_json_string(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("vocab parse error: ") + e.what());
  }
  if (!j.contains("version") || j["version"] != kVocabVersion || !j.contains("tokens"))
    throw FormatError("vocab: unsupported version or missing tokens");
  Tokenizer tok;
  tok.tokens_ = j["tokens"].get<std::vector<std::string>>();
  if (tok.tokens_.size() < special::kCount ||
      !std::equal(special_names().begin(), special_names().end(), tok.tokens_.begin()))
    throw ValidationError("vocab: special tokens missing or out of order");
  tok.index();
  if (tok.ids_.size() != tok.tokens_.size()) throw ValidationError("vocab: duplicate tokens");
  return tok;
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  return from_json_string(read_file(path));
}

void Tokenizer::save(const std::filesystem::path& path) const { write_file(path, to_json_string()); }

int Tokenizer::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? special::kUnk : it->second;
}

const std::string& Tokenizer::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ValidationError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  for (const auto& t : split_tokens(text)) out.push_back(id(t));
  return out;
}

std::string Tokenizer::decode(std::span<const int> ids, bool skip_special) const {
  std::vector<std::string> toks;
  for (int i : ids) {
    if (skip_special && is_special(i)) continue;
    toks.push_back(token(i));
  }
  return join_tokens(toks);
}

std::vector<int> encode_history(const Tokenizer& tok, std::span<const std::string> history,
                                std::size_t max_sent, std::size_t max_len) {
  const std::size_t first = history.size() > max_sent ? history.size() - max_sent : 0;
  std::vector<int> body;
  for (std::size_t i = first; i < history.size(); ++i) {
    auto ids = tok.encode(history[i]);
    body.insert(body.end(), ids.begin(), ids.end());
    body.push_back(special::kSep);
  }
  std::vector<int> out{special::kCls};
  const std::size_t budget = max_len > 0 ? max_len - 1 : 0;
  const std::size_t skip = body.size() > budget ? body.size() - budget : 0;
  out.insert(out.end(), body.begin() + static_cast<std::ptrdiff_t>(skip), body.end());
  return out;
}

std::vector<int> encode_single(const Tokenizer& tok, std::string_view text, std::size_t max_len) {
  std::vector<int> out{special::kCls};
  auto ids = tok.encode(text);
  out.insert(out.end(), ids.begin(), ids.end());
  if (out.size() + 1 > max_len) out.resize(max_len > 1 ? max_len - 1 : 1);
  out.push_back(special::kSep);
  return out;
}

}  // namespace kgdial
