#include "kgdial/aho_corasick.hpp"

#include <algorithm>
#include <queue>

namespace kgdial {

AhoCorasick::AhoCorasick(std::span<const std::string> patterns) {
  for (const auto& pat : patterns) {
    if (pat.empty()) continue;
    std::int32_t state = 0;
    for (unsigned char c : pat) {
      std::int32_t next = child(state, c);
      if (next < 0) {
        next = static_cast<std::int32_t>(nodes_.size());
        auto& kids = nodes_[static_cast<std::size_t>(state)].children;
        kids.insert(std::lower_bound(kids.begin(), kids.end(), std::make_pair(c, std::int32_t{0})),
                    {c, next});
        nodes_.emplace_back();
      }
      state = next;
    }
    auto& node = nodes_[static_cast<std::size_t>(state)];
    if (!node.output) {
      node.output = true;
      node.pattern = static_cast<std::int32_t>(patterns_.size());
      patterns_.push_back(pat);
    }
  }

  // Breadth-first failure links; a node's failure target is always shallower.
  std::queue<std::int32_t> queue;
  for (const auto& [c, kid] : nodes_[0].children) {
    nodes_[static_cast<std::size_t>(kid)].fail = 0;
    queue.push(kid);
  }
  while (!queue.empty()) {
    const std::int32_t state = queue.front();
    queue.pop();
    for (const auto& [c, kid] : nodes_[static_cast<std::size_t>(state)].children) {
      std::int32_t f = nodes_[static_cast<std::size_t>(state)].fail;
      while (f != 0 && child(f, c) < 0) f = nodes_[static_cast<std::size_t>(f)].fail;
      const std::int32_t target = child(f, c);
      auto& k = nodes_[static_cast<std::size_t>(kid)];
      k.fail = (target >= 0 && target != kid) ? target : 0;
      const auto& fn = nodes_[static_cast<std::size_t>(k.fail)];
      k.dict_link = fn.output ? k.fail : fn.dict_link;
      queue.push(kid);
    }
  }
}

std::int32_t AhoCorasick::child(std::int32_t state, std::uint8_t byte) const {
  const auto& kids = nodes_[static_cast<std::size_t>(state)].children;
  auto it = std::lower_bound(kids.begin(), kids.end(), byte,
                             [](const auto& p, std::uint8_t b) { return p.first < b; });
  if (it == kids.end() || it->first != byte) return -1;
  return it->second;
}

std::int32_t AhoCorasick::next_state(std::int32_t state, std::uint8_t byte) const {
  while (true) {
    const std::int32_t next = child(state, byte);
    if (next >= 0) return next;
    if (state == 0) return 0;
    state = nodes_[static_cast<std::size_t>(state)].fail;
  }
}

std::vector<AhoCorasick::Match> AhoCorasick::find_all(std::string_view text) const {
  std::vector<Match> out;
  scan(text, [&](const Match& m) { out.push_back(m); });
  return out;
}

}  // namespace kgdial
