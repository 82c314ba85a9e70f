// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/draft_tree.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace spectree {

DraftTree::DraftTree() {
    nodes_.push_back(TreeNode{});
    children_.emplace_back();
}

NodeId DraftTree::insert(NodeId parent, Token token, double path_score, int rank) {
    if (parent < 0 || static_cast<std::size_t>(parent) >= nodes_.size()) {
        throw std::invalid_argument("DraftTree: parent " + std::to_string(parent) + " is not in the tree");
    }
    if (token < 0) {
        throw std::invalid_argument("DraftTree: negative token id");
    }
    if (find_child(parent, token)) {
        throw std::invalid_argument("DraftTree: duplicate child token " + std::to_string(token) + " under node " +
                                    std::to_string(parent));
    }
    const TreeNode& p = nodes_[static_cast<std::size_t>(parent)];
    TreeNode n;
    n.id = static_cast<NodeId>(nodes_.size());
    n.parent = parent;
    n.depth = p.depth + 1;
    n.token = token;
    n.path_score = path_score;
    n.rank = rank;
    nodes_.push_back(n);
    children_.emplace_back();
    children_[static_cast<std::size_t>(parent)].push_back(n.id);
    surrogate_ += path_score;
    max_depth_ = std::max(max_depth_, n.depth);
    return n.id;
}

NodeId DraftTree::add_child(NodeId parent, Token token, double prob, int rank) {
    if (!(prob >= 0.0 && prob <= 1.0)) {
        throw std::invalid_argument("DraftTree::add_child: probability outside [0,1]");
    }
    if (parent < 0 || static_cast<std::size_t>(parent) >= nodes_.size()) {
        throw std::invalid_argument("DraftTree: parent " + std::to_string(parent) + " is not in the tree");
    }
    return insert(parent, token, nodes_[static_cast<std::size_t>(parent)].path_score * prob, rank);
}

NodeId DraftTree::add_child_with_score(NodeId parent, Token token, double path_score, int rank) {
    if (parent < 0 || static_cast<std::size_t>(parent) >= nodes_.size()) {
        throw std::invalid_argument("DraftTree: parent " + std::to_string(parent) + " is not in the tree");
    }
    if (!(path_score >= 0.0 && path_score <= nodes_[static_cast<std::size_t>(parent)].path_score)) {
        throw std::invalid_argument("DraftTree: path score must lie in [0, parent score]");
    }
    return insert(parent, token, path_score, rank);
}

std::optional<NodeId> DraftTree::find_child(NodeId parent, Token token) const {
    for (NodeId c : children_.at(static_cast<std::size_t>(parent))) {
        if (nodes_[static_cast<std::size_t>(c)].token == token) {
            return c;
        }
    }
    return std::nullopt;
}

std::vector<Token> DraftTree::path_tokens(NodeId id) const {
    std::vector<Token> out(static_cast<std::size_t>(node(id).depth));
    for (NodeId cur = id; cur != 0; cur = nodes_[static_cast<std::size_t>(cur)].parent) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(cur)];
        out[static_cast<std::size_t>(n.depth - 1)] = n.token;
    }
    return out;
}

DraftTree DraftTree::prefix(std::size_t draft_count) const {
    if (draft_count > this->draft_count()) {
        throw std::out_of_range("DraftTree::prefix: longer than the tree");
    }
    DraftTree out;
    out.origin_ = origin_;
    for (std::size_t i = 1; i <= draft_count; ++i) {
        const TreeNode& n = nodes_[i];
        out.insert(n.parent, n.token, n.path_score, n.rank);
    }
    return out;
}

ExpansionFrontier::ExpansionFrontier(const CandidateLattice& lattice) : lattice_(&lattice) {
    if (lattice.empty()) {
        throw std::invalid_argument("ExpansionFrontier: empty lattice");
    }
    push(0, 1.0, 1, 0);
}

void ExpansionFrontier::push(NodeId parent, double parent_score, int depth, int rank) {
    const LatticeEntry& e = lattice_->entry(static_cast<std::size_t>(depth - 1), static_cast<std::size_t>(rank));
    heap_.push(Candidate{parent_score * e.prob, depth, e.token, parent, rank});
}

const TreeNode& ExpansionFrontier::expand_into(DraftTree& tree) {
    Candidate c = heap_.top();
    heap_.pop();
    NodeId id = tree.add_child_with_score(c.parent, c.token, c.path_score, c.rank);
    if (static_cast<std::size_t>(c.depth) < lattice_->gamma()) {
        push(id, c.path_score, c.depth + 1, 0);
    }
    if (static_cast<std::size_t>(c.rank) + 1 < lattice_->top_k()) {
        push(c.parent, tree.node(c.parent).path_score, c.depth, c.rank + 1);
    }
    return tree.node(id);
}

DraftTree best_first_expand(const CandidateLattice& lattice, std::size_t n_max) {
    if (lattice.empty()) {
        throw std::invalid_argument("best_first_expand: empty lattice");
    }
    if (n_max < 1) {
        throw std::invalid_argument("best_first_expand: n_max must be >= 1");
    }
    DraftTree tree;
    tree.set_origin(TreeOrigin::best_first);
    ExpansionFrontier frontier(lattice);
    while (tree.draft_count() < n_max && !frontier.empty()) {
        frontier.expand_into(tree);
    }
    return tree;
}

DraftTree beam_expand(const CandidateLattice& lattice, std::size_t width, std::size_t depth) {
    if (lattice.empty()) {
        throw std::invalid_argument("beam_expand: empty lattice");
    }
    if (width < 1 || depth < 1) {
        throw std::invalid_argument("beam_expand: width and depth must be >= 1");
    }
    if (depth > lattice.gamma()) {
        throw std::invalid_argument("beam_expand: depth exceeds block size");
    }
    struct Extension {
        double score;
        Token token;
        NodeId parent;
        int rank;
        double prob;
    };
    DraftTree tree;
    tree.set_origin(TreeOrigin::beam);
    std::vector<NodeId> beam{0};
    std::vector<Extension> ext;
    for (std::size_t level = 0; level < depth; ++level) {
        ext.clear();
        auto row = lattice.entries(level);
        for (NodeId p : beam) {
            double ps = tree.node(p).path_score;
            for (std::size_t r = 0; r < row.size(); ++r) {
                ext.push_back({ps * row[r].prob, row[r].token, p, static_cast<int>(r), row[r].prob});
            }
        }
        std::size_t keep = std::min(width, ext.size());
        std::partial_sort(ext.begin(), ext.begin() + static_cast<std::ptrdiff_t>(keep), ext.end(),
                          [](const Extension& a, const Extension& b) {
                              if (a.score != b.score) return a.score > b.score;
                              if (a.token != b.token) return a.token < b.token;
                              return a.parent < b.parent;
                          });
        beam.clear();
        for (std::size_t i = 0; i < keep; ++i) {
            beam.push_back(tree.add_child_with_score(ext[i].parent, ext[i].token, ext[i].score, ext[i].rank));
        }
    }
    return tree;
}

double surrogate_of(const DraftTree& tree) {
    double total = 0.0;
    for (const TreeNode& n : tree.nodes()) {
        total += n.path_score;
    }
    return total;
}

std::vector<double> marginal_gains(const DraftTree& tree) {
    if (tree.origin() != TreeOrigin::best_first) {
        throw ContractViolation("marginal_gains: tree was not built by best-first expansion");
    }
    std::vector<double> gains;
    gains.reserve(tree.draft_count());
    for (std::size_t i = 1; i < tree.size(); ++i) {
        double g = tree.nodes()[i].path_score;
        if (!gains.empty() && g > gains.back()) {
            throw ContractViolation("marginal_gains: expansion order is not non-increasing at node " +
                                    std::to_string(i));
        }
        gains.push_back(g);
    }
    return gains;
}

namespace {
const char* origin_name(TreeOrigin o) {
    switch (o) {
    case TreeOrigin::best_first:
        return "best_first";
    case TreeOrigin::beam:
        return "beam";
    case TreeOrigin::manual:
        break;
    }
    return "manual";
}
} // namespace

void write_tree(std::ostream& out, const DraftTree& tree) {
    out << "# origin " << origin_name(tree.origin()) << '\n';
    out << std::setprecision(17);
    for (const TreeNode& n : tree.nodes()) {
        out << n.id << ' ' << n.parent << ' ' << n.depth << ' ' << n.token << ' ' << n.path_score << '\n';
    }
}

DraftTree read_tree(std::istream& in) {
    DraftTree tree;
    std::string line;
    bool saw_root = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            std::istringstream hdr(line.substr(1));
            std::string key;
            std::string value;
            if (hdr >> key >> value && key == "origin") {
                if (value == "best_first") tree.set_origin(TreeOrigin::best_first);
                else if (value == "beam") tree.set_origin(TreeOrigin::beam);
            }
            continue;
        }
        std::istringstream row(line);
        long long id = 0;
        long long parent = 0;
        long long depth = 0;
        long long token = 0;
        double score = 0.0;
        if (!(row >> id >> parent >> depth >> token >> score)) {
            throw std::runtime_error("read_tree: malformed line " + std::to_string(lineno));
        }
        if (!saw_root) {
            if (id != 0 || parent != kNoParent || depth != 0 || score != 1.0) {
                throw std::runtime_error("read_tree: first node must be the root '0 -1 0 -1 1'");
            }
            saw_root = true;
            continue;
        }
        if (id != static_cast<long long>(tree.size())) {
            throw std::runtime_error("read_tree: node ids must be consecutive (line " + std::to_string(lineno) + ")");
        }
        NodeId nid = tree.add_child_with_score(static_cast<NodeId>(parent), static_cast<Token>(token), score);
        if (tree.node(nid).depth != depth) {
            throw std::runtime_error("read_tree: depth mismatch on line " + std::to_string(lineno));
        }
    }
    if (!saw_root) {
        throw std::runtime_error("read_tree: no nodes");
    }
    return tree;
}

} // namespace spectree
