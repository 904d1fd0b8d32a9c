#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relgen/corpus.hpp"
#include "relgen/tokenizer.hpp"

namespace relgen {

// Token-id trie over the tokenized texts of every corpus triple. Root is the
// empty prefix; one terminal node per triple, carrying its TripleId so a
// decoded sequence maps back to a triple without re-parsing text. A node may
// be terminal and still have children (one triple text extending another).
class PrefixTrie {
public:
    using NodeId = int32_t;
    static constexpr NodeId kRoot = 0;

    static PrefixTrie build(const Corpus& corpus, const Vocabulary& vocab);

    NodeId root() const { return kRoot; }
    std::optional<NodeId> child(NodeId node, TokenId token) const;
    const std::map<TokenId, NodeId>& children(NodeId node) const;
    std::optional<TripleId> terminal(NodeId node) const;

    // Node reached by following `prefix` from the root, if any.
    std::optional<NodeId> walk(const TokenSequence& prefix) const;

    // Candidate continuations of `prefix` in ascending token id; kEosToken is
    // present iff a triple ends exactly at `prefix`. Throws on off-trie input.
    std::vector<TokenId> allowed_next(const TokenSequence& prefix) const;
    std::vector<TokenId> allowed_next(NodeId node) const;

    // TripleId at the terminal reached by `seq`; throws if `seq` is not a
    // complete triple path.
    TripleId resolve(const TokenSequence& seq) const;
    bool is_terminal_path(const TokenSequence& seq) const noexcept;

    bool empty() const { return terminal_count_ == 0; }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    int edge_count() const { return node_count() - 1; }
    int terminal_count() const { return terminal_count_; }
    int max_depth() const { return max_depth_; }

    // Adjacency form for debugging: nodes with child token -> node id maps.
    std::string dump_json(const Vocabulary& vocab) const;

private:
    struct Node {
        std::map<TokenId, NodeId> children;  // ordered: deterministic iteration
        std::optional<TripleId> triple;
    };

    std::vector<Node> nodes_{Node{}};
    int terminal_count_ = 0;
    int max_depth_ = 0;
};

}  // namespace relgen
