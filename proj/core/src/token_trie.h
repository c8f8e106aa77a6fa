/*!
 *  Copyright (c) 2026 by Contributors
 * \file token_trie.h
 * \brief Byte trie over vocabulary surface forms (eos excluded).
 */
#ifndef CDTAX_SRC_TOKEN_TRIE_H_
#define CDTAX_SRC_TOKEN_TRIE_H_

#include <cdtax/vocab.h>

#include <cstdint>
#include <string_view>
#include <vector>

namespace cdtax::detail {

class TokenTrie {
 public:
  struct Node {
    std::vector<std::pair<std::uint8_t, std::int32_t>> children;
    std::vector<TokenId> ends;
  };

  explicit TokenTrie(const Vocabulary& vocab) : nodes_(1) {
    for (const Token& t : vocab.tokens()) {
      if (t.id == vocab.eos_id()) continue;
      std::int32_t cur = 0;
      for (char c : t.bytes) cur = Child(cur, static_cast<std::uint8_t>(c), /*create=*/true);
      nodes_[static_cast<std::size_t>(cur)].ends.push_back(t.id);
    }
  }

  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::int32_t root() const { return 0; }

  /*! \brief Token ids matching a prefix of bytes, longest first (ties by ascending id). */
  std::vector<TokenId> PrefixMatches(std::string_view bytes) const {
    std::vector<TokenId> out;
    std::int32_t cur = 0;
    for (char c : bytes) {
      cur = Find(cur, static_cast<std::uint8_t>(c));
      if (cur < 0) break;
      const auto& ends = nodes_[static_cast<std::size_t>(cur)].ends;
      out.insert(out.begin(), ends.begin(), ends.end());
    }
    return out;
  }

 private:
  std::int32_t Find(std::int32_t from, std::uint8_t byte) const {
    for (const auto& [b, child] : nodes_[static_cast<std::size_t>(from)].children) {
      if (b == byte) return child;
    }
    return -1;
  }

  std::int32_t Child(std::int32_t from, std::uint8_t byte, bool create) {
    std::int32_t found = Find(from, byte);
    if (found >= 0 || !create) return found;
    auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    nodes_[static_cast<std::size_t>(from)].children.emplace_back(byte, id);
    return id;
  }

  std::vector<Node> nodes_;
};

}  // namespace cdtax::detail

#endif  // CDTAX_SRC_TOKEN_TRIE_H_
