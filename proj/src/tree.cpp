#include "treevimp/tree.hpp"

#include "json_detail.hpp"

#include <stdexcept>
#include <vector>

namespace treevimp {

using nlohmann::json;

void Tree::validate() const {
    if (nodes.empty()) throw std::runtime_error("tree has no nodes");
    if (root < 0 || root >= static_cast<int>(nodes.size())) throw std::runtime_error("bad root id");
    if (nodes[root].parent != -1) throw std::runtime_error("root has a parent");

    std::vector<int> seen_label(num_terminals + 1, 0);
    std::vector<char> visited(nodes.size(), 0);
    std::vector<int> stack{root};
    int terminals = 0;
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        if (visited[id]) throw std::runtime_error("node reachable twice");
        visited[id] = 1;
        const Node& n = nodes[id];
        if (n.is_terminal()) {
            if (n.label < 1 || n.label > num_terminals) throw std::runtime_error("terminal label out of range");
            if (seen_label[n.label]++) throw std::runtime_error("duplicate terminal label");
            ++terminals;
        } else {
            if (n.left < 0 || n.right < 0) throw std::runtime_error("internal node missing a child");
            if (nodes[n.left].parent != id || nodes[n.right].parent != id)
                throw std::runtime_error("child parent link broken");
            stack.push_back(n.right);
            stack.push_back(n.left);
        }
    }
    if (terminals != num_terminals) throw std::runtime_error("terminal count mismatch");
    for (char v : visited)
        if (!v) throw std::runtime_error("unreachable node");
}

int node_membership(const Tree& tree, std::span<const double> x) {
    if (static_cast<int>(x.size()) != tree.dim)
        throw std::runtime_error("covariate dimension mismatch");
    int id = tree.root;
    while (!tree.nodes[id].is_terminal()) {
        const Node& n = tree.nodes[id];
        id = (x[n.split_var] <= n.cut) ? n.left : n.right;
    }
    return tree.nodes[id].label;
}

double predict(const Tree& tree, std::span<const double> x) {
    if (static_cast<int>(x.size()) != tree.dim)
        throw std::runtime_error("covariate dimension mismatch");
    int id = tree.root;
    while (!tree.nodes[id].is_terminal()) {
        const Node& n = tree.nodes[id];
        id = (x[n.split_var] <= n.cut) ? n.left : n.right;
    }
    return tree.nodes[id].value;
}

Tree rectangle_indicator_tree(std::span<const double> cuts) {
    if (cuts.empty()) throw std::runtime_error("empty cut vector");
    const int d = static_cast<int>(cuts.size());
    Tree tree;
    tree.dim = d;
    tree.num_terminals = d + 1;
    // Chain of internal nodes 0..d-1; node i splits x_i <= cuts[i], right
    // child is the "fail" terminal, left child continues the chain.
    for (int i = 0; i < d; ++i) {
        Node n;
        n.split_var = i;
        n.cut = cuts[i];
        n.parent = i - 1;
        tree.nodes.push_back(n);
    }
    // Terminal that passed every condition.
    Node pass;
    pass.parent = d - 1;
    pass.value = 1.0;
    pass.label = 1;
    tree.nodes.push_back(pass);
    tree.nodes[d - 1].left = d;
    // Fail terminals, labeled in depth-first order: failing the last
    // condition is visited right after the pass terminal, then upward.
    int next_label = 2;
    for (int i = d - 1; i >= 0; --i) {
        Node fail;
        fail.parent = i;
        fail.value = 0.0;
        tree.nodes.push_back(fail);
        tree.nodes[i].right = static_cast<int>(tree.nodes.size()) - 1;
    }
    // Chain links: node i's left child is node i+1 for i < d-1.
    for (int i = 0; i + 1 < d; ++i) tree.nodes[i].left = i + 1;
    // Depth-first labels: pass terminal first, then the fail terminals from
    // the deepest split back to the root.
    for (int i = d - 1; i >= 0; --i) tree.nodes[tree.nodes[i].right].label = next_label++;
    return tree;
}

Tree scale_terminal_values(Tree tree, double factor) {
    for (Node& n : tree.nodes)
        if (n.is_terminal()) n.value *= factor;
    return tree;
}

// ---- JSON ---------------------------------------------------------------

static json node_to_json(int id, const Node& n) {
    if (n.is_terminal())
        return json{{"id", id}, {"kind", "terminal"}, {"label", n.label}, {"value", n.value}, {"count", n.count}};
    return json{{"id", id},   {"kind", "internal"}, {"var", n.split_var},
                {"cut", n.cut}, {"left", n.left},   {"right", n.right}};
}

json tree_to_json_object(const Tree& tree) {
    json nodes = json::array();
    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
        nodes.push_back(node_to_json(static_cast<int>(i), tree.nodes[i]));
    return json{{"d", tree.dim}, {"root", tree.root}, {"nodes", std::move(nodes)}};
}

std::string tree_to_json(const Tree& tree) {
    return tree_to_json_object(tree).dump();
}

Tree tree_from_json_object(const json& j) {
    Tree tree;
    tree.dim = j.at("d").get<int>();
    tree.root = j.at("root").get<int>();
    const json& nodes = j.at("nodes");
    tree.nodes.resize(nodes.size());
    int max_label = 0;
    for (const json& nj : nodes) {
        const int id = nj.at("id").get<int>();
        if (id < 0 || id >= static_cast<int>(tree.nodes.size()))
            throw std::runtime_error("tree json: node id out of range");
        Node n;
        const std::string kind = nj.at("kind").get<std::string>();
        if (kind == "internal") {
            n.split_var = nj.at("var").get<int>();
            n.cut = nj.at("cut").get<double>();
            n.left = nj.at("left").get<int>();
            n.right = nj.at("right").get<int>();
        } else if (kind == "terminal") {
            n.label = nj.at("label").get<int>();
            n.value = nj.at("value").get<double>();
            n.count = nj.at("count").get<int>();
            max_label = std::max(max_label, n.label);
        } else {
            throw std::runtime_error("tree json: unknown node kind '" + kind + "'");
        }
        tree.nodes[id] = n;
    }
    tree.num_terminals = max_label;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const Node& n = tree.nodes[i];
        if (!n.is_terminal()) {
            tree.nodes[n.left].parent = static_cast<int>(i);
            tree.nodes[n.right].parent = static_cast<int>(i);
        }
    }
    tree.validate();
    return tree;
}

Tree tree_from_json(const std::string& text) {
    return tree_from_json_object(json::parse(text));
}

} // namespace treevimp
