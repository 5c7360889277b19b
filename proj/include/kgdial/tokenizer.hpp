#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgdial {

/// Fixed ids of the special tokens; build() always places them first.
namespace special {
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kCls = 2;
inline constexpr int kSep = 3;
inline constexpr int kBos = 4;
inline constexpr int kEos = 5;
inline constexpr int kSpeaker1 = 6;
inline constexpr int kSpeaker2 = 7;
inline constexpr int kCount = 8;
}  // namespace special

class Tokenizer {
 public:
  /// Tokens with count >= min_count, ordered by frequency desc then
  /// lexicographically. Throws ConfigError on an empty corpus.
  static Tokenizer build(std::span<const std::string> corpus, int min_count = 1);

  static Tokenizer load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string to_json_string() const;
  static Tokenizer from_json_string(std::string_view json);

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  bool is_special(int id) const { return id >= 0 && id < special::kCount; }

  /// Plain text to ids, no special tokens added.
  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids, bool skip_special = true) const;

  bool operator==(const Tokenizer& other) const { return tokens_ == other.tokens_; }

 private:
  void index();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Classifier / matcher history form: [CLS] u1 [SEP] u2 [SEP] ... un [SEP]
/// over the last `max_sent` utterances. If longer than `max_len`, the oldest
/// tokens after [CLS] are dropped so the newest utterance survives.
std::vector<int> encode_history(const Tokenizer& tok, std::span<const std::string> history,
                                std::size_t max_sent = 10, std::size_t max_len = 400);

/// [CLS] text [SEP], truncated at the back to `max_len`.
std::vector<int> encode_single(const Tokenizer& tok, std::string_view text,
                               std::size_t max_len = 400);

}  // namespace kgdial
