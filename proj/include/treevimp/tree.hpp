#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treevimp/dataset.hpp"
#include "treevimp/rng.hpp"

namespace treevimp {

// One tree node. Internal nodes carry the split rule "x_var <= cut goes
// left"; terminal nodes carry a 1-based label, the fitted value (mean
// response of the training rows reaching the node) and the row count.
struct Node {
    int split_var = -1;   // -1 marks a terminal
    double cut = 0.0;
    int left = -1;
    int right = -1;
    int parent = -1;

    int label = 0;        // terminals: 1..M
    double value = 0.0;
    int count = 0;

    bool is_terminal() const { return split_var < 0; }
};

// Binary regression tree. Node 0 is the root; terminals are labeled 1..M
// in depth-first (left-first) order. Immutable after construction.
struct Tree {
    std::vector<Node> nodes;
    int root = 0;
    int dim = 0;
    int num_terminals = 0;

    const Node& node(int id) const { return nodes[id]; }

    // Fitted value per terminal label, index label-1.
    std::vector<double> terminal_values() const {
        std::vector<double> v(num_terminals, 0.0);
        for (const Node& n : nodes)
            if (n.is_terminal()) v[n.label - 1] = n.value;
        return v;
    }

    // Checks the structural invariants (single root, two children per
    // internal node, dense labels 1..M, consistent parent links).
    void validate() const;
};

struct GrowConfig {
    int min_node_size = 5;
    std::optional<int> max_depth;
    std::optional<int> mtry;       // per-node candidate count; unset = all
    std::uint64_t seed = 0;
};

struct SplitChoice {
    int var = 0;
    double cut = 0.0;
    double sse_reduction = 0.0;
};

// Best (var, cut) over candidate variables, maximizing the reduction in
// within-node sum of squared errors. Cuts are the observed values of the
// variable among `rows`; a cut must leave at least min_node_size rows on
// each side. Ties break to the lowest variable index, then smallest cut.
// Returns nullopt when no admissible split improves the SSE.
std::optional<SplitChoice> best_split(const Dataset& data, std::span<const std::size_t> rows,
                                      std::span<const int> candidate_vars, int min_node_size);

Tree grow_tree(const Dataset& data, const GrowConfig& config, Rng& rng);
Tree grow_tree(const Dataset& data, const GrowConfig& config);

// Terminal label reached by descending "x_var <= cut -> left" from the root.
int node_membership(const Tree& tree, std::span<const double> x);

double predict(const Tree& tree, std::span<const double> x);

// The chain tree from the constructive forest-expressiveness argument:
// split x_1 <= c_1, then the left child on x_2 <= c_2, and so on. The
// terminal satisfying every condition has value 1, the other d terminals 0.
Tree rectangle_indicator_tree(std::span<const double> cuts);

// Multiplies every terminal value by `factor` (used to assemble forests of
// scaled indicator trees).
Tree scale_terminal_values(Tree tree, double factor);

// JSON schema:
//   { "d": int, "root": int, "nodes": [ {"id", "kind": "internal", "var",
//     "cut", "left", "right"} | {"id", "kind": "terminal", "label",
//     "value", "count"} ] }
std::string tree_to_json(const Tree& tree);
Tree tree_from_json(const std::string& text);

} // namespace treevimp
