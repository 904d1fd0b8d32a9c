#include "relgen/trie.hpp"

#include <json.hpp>

#include "relgen/error.hpp"

namespace relgen {

using nlohmann::json;

PrefixTrie PrefixTrie::build(const Corpus& corpus, const Vocabulary& vocab) {
    PrefixTrie trie;
    for (const Triple& t : corpus.triples) {
        TokenSequence seq = tokenize(corpus.triple_text(t.id), vocab);
        NodeId node = kRoot;
        for (TokenId tok : seq) {
            auto it = trie.nodes_[static_cast<size_t>(node)].children.find(tok);
            if (it == trie.nodes_[static_cast<size_t>(node)].children.end()) {
                NodeId next = static_cast<NodeId>(trie.nodes_.size());
                trie.nodes_[static_cast<size_t>(node)].children.emplace(tok, next);
                trie.nodes_.push_back(Node{});
                node = next;
            } else {
                node = it->second;
            }
        }
        Node& terminal = trie.nodes_[static_cast<size_t>(node)];
        if (terminal.triple && *terminal.triple != t.id)
            throw_invalid("corpus ambiguity: triples " + std::to_string(*terminal.triple) +
                          " and " + std::to_string(t.id) + " share the text \"" +
                          corpus.triple_text(t.id) + "\"");
        terminal.triple = t.id;
        ++trie.terminal_count_;
        trie.max_depth_ = std::max(trie.max_depth_, static_cast<int>(seq.size()));
    }
    return trie;
}

std::optional<PrefixTrie::NodeId> PrefixTrie::child(NodeId node, TokenId token) const {
    const auto& children = nodes_[static_cast<size_t>(node)].children;
    auto it = children.find(token);
    if (it == children.end()) return std::nullopt;
    return it->second;
}

const std::map<TokenId, PrefixTrie::NodeId>& PrefixTrie::children(NodeId node) const {
    return nodes_[static_cast<size_t>(node)].children;
}

std::optional<TripleId> PrefixTrie::terminal(NodeId node) const {
    return nodes_[static_cast<size_t>(node)].triple;
}

std::optional<PrefixTrie::NodeId> PrefixTrie::walk(const TokenSequence& prefix) const {
    NodeId node = kRoot;
    for (TokenId tok : prefix) {
        auto next = child(node, tok);
        if (!next) return std::nullopt;
        node = *next;
    }
    return node;
}

std::vector<TokenId> PrefixTrie::allowed_next(NodeId node) const {
    const Node& n = nodes_[static_cast<size_t>(node)];
    std::vector<TokenId> out;
    out.reserve(n.children.size() + 1);
    if (n.triple) out.push_back(kEosToken);
    for (const auto& [tok, _] : n.children) out.push_back(tok);
    // kEosToken = 1 precedes every corpus token id, so the list stays sorted.
    return out;
}

std::vector<TokenId> PrefixTrie::allowed_next(const TokenSequence& prefix) const {
    auto node = walk(prefix);
    if (!node) throw_invalid("off-trie prefix");
    return allowed_next(*node);
}

TripleId PrefixTrie::resolve(const TokenSequence& seq) const {
    auto node = walk(seq);
    if (!node || !nodes_[static_cast<size_t>(*node)].triple)
        throw_invalid("sequence is not a complete triple path");
    return *nodes_[static_cast<size_t>(*node)].triple;
}

bool PrefixTrie::is_terminal_path(const TokenSequence& seq) const noexcept {
    NodeId node = kRoot;
    for (TokenId tok : seq) {
        if (tok < 0) return false;
        const auto& children = nodes_[static_cast<size_t>(node)].children;
        auto it = children.find(tok);
        if (it == children.end()) return false;
        node = it->second;
    }
    return nodes_[static_cast<size_t>(node)].triple.has_value();
}

std::string PrefixTrie::dump_json(const Vocabulary& vocab) const {
    json nodes = json::array();
    for (const Node& n : nodes_) {
        json children = json::object();
        for (const auto& [tok, next] : n.children) children[vocab.token(tok)] = next;
        json entry{{"children", children}};
        if (n.triple) entry["triple_id"] = *n.triple;
        nodes.push_back(std::move(entry));
    }
    json j{{"nodes", nodes},
           {"node_count", node_count()},
           {"edge_count", edge_count()},
           {"terminal_count", terminal_count()},
           {"max_depth", max_depth()}};
    return j.dump(2) + "\n";
}

}  // namespace relgen
