#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgdial {

/// Byte-level Aho-Corasick automaton: a trie (goto function) with failure
/// links and dictionary-suffix links for the output function. Reports every
/// occurrence of every pattern, overlapping ones included.
class AhoCorasick {
 public:
  struct Match {
    std::size_t pattern;  // index into patterns()
    std::size_t end;      // byte offset one past the match
  };

  AhoCorasick() = default;
  /// Empty patterns are ignored; duplicate patterns collapse into one.
  explicit AhoCorasick(std::span<const std::string> patterns);

  const std::vector<std::string>& patterns() const { return patterns_; }
  std::size_t state_count() const { return nodes_.size(); }

  template <typename OnMatch>
  void scan(std::string_view text, OnMatch&& on_match) const {
    std::int32_t state = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      state = next_state(state, static_cast<std::uint8_t>(text[i]));
      for (std::int32_t s = nodes_[static_cast<std::size_t>(state)].output ? state
                            : nodes_[static_cast<std::size_t>(state)].dict_link;
           s > 0; s = nodes_[static_cast<std::size_t>(s)].dict_link)
        on_match(Match{static_cast<std::size_t>(nodes_[static_cast<std::size_t>(s)].pattern), i + 1});
    }
  }

  std::vector<Match> find_all(std::string_view text) const;

 private:
  struct Node {
    std::vector<std::pair<std::uint8_t, std::int32_t>> children;  // sorted by byte
    std::int32_t fail = 0;
    std::int32_t dict_link = -1;  // nearest proper suffix state with an output
    std::int32_t pattern = -1;
    bool output = false;
  };

  std::int32_t child(std::int32_t state, std::uint8_t byte) const;
  std::int32_t next_state(std::int32_t state, std::uint8_t byte) const;

  std::vector<Node> nodes_{Node{}};
  std::vector<std::string> patterns_;
};

}  // namespace kgdial
