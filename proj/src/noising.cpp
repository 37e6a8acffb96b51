#include "treevimp/noising.hpp"

#include <algorithm>
#include <stdexcept>

namespace treevimp {

namespace {

bool contains(std::span<const int> vars, int v) {
    return std::find(vars.begin(), vars.end(), v) != vars.end();
}

void check_vars(const Tree& tree, std::span<const int> vars) {
    if (vars.size() != 1 && vars.size() != 2)
        throw std::runtime_error("noising takes one or two variables");
    if (vars.size() == 2 && vars[0] == vars[1]) throw std::runtime_error("identical pair");
    for (int v : vars)
        if (v < 0 || v >= tree.dim) throw std::runtime_error("variable index out of range");
}

} // namespace

int noised_membership_sample(const Tree& tree, std::span<const double> x,
                             std::span<const int> vars, NoisingMode mode, Rng& rng) {
    if (static_cast<int>(x.size()) != tree.dim)
        throw std::runtime_error("covariate dimension mismatch");
    check_vars(tree, vars);
    int id = tree.root;
    bool randomized = false;   // FullRandom: all coins below the trigger
    while (!tree.nodes[id].is_terminal()) {
        const Node& n = tree.nodes[id];
        bool flip;
        if (mode == NoisingMode::FullRandom) {
            if (!randomized && contains(vars, n.split_var)) randomized = true;
            flip = randomized;
        } else {
            flip = contains(vars, n.split_var);
        }
        if (flip)
            id = rng.coin() ? n.right : n.left;
        else
            id = (x[n.split_var] <= n.cut) ? n.left : n.right;
    }
    return tree.nodes[id].label;
}

double noised_predict_sample(const Tree& tree, std::span<const double> x,
                             std::span<const int> vars, NoisingMode mode, Rng& rng) {
    const int label = noised_membership_sample(tree, x, vars, mode, rng);
    for (const Node& n : tree.nodes)
        if (n.is_terminal() && n.label == label) return n.value;
    throw std::runtime_error("terminal label not found");
}

NoisedPredictor build_noised_predictor(const Tree& tree, std::span<const int> vars) {
    check_vars(tree, vars);
    NoisedPredictor np;
    np.tree = &tree;
    np.vars.assign(vars.begin(), vars.end());

    std::vector<MaximalSubtree> subtrees;
    if (vars.size() == 1) {
        subtrees = maximal_subtrees(tree, vars[0]);
    } else {
        PairedSubtrees paired = paired_maximal_subtrees(tree, vars[0], vars[1]);
        subtrees = std::move(paired.kept_v);
        for (MaximalSubtree& st : paired.kept_w) subtrees.push_back(std::move(st));
    }

    const std::vector<double> fitted = tree.terminal_values();
    np.region_of_label.assign(tree.num_terminals, -1);
    for (MaximalSubtree& st : subtrees) {
        NoisedPredictor::Region region;
        region.pd = path_distribution(st, fitted);
        region.moments = subtree_moments(region.pd);
        region.subtree = std::move(st);
        const int index = static_cast<int>(np.regions.size());
        for (int label : region.subtree.terminals)
            np.region_of_label[static_cast<std::size_t>(label) - 1] = index;
        np.regions.push_back(std::move(region));
    }
    return np;
}

Moments noised_moments_at(const NoisedPredictor& np, std::span<const double> x) {
    const int label = node_membership(*np.tree, x);
    const int region = np.region_of_label[static_cast<std::size_t>(label) - 1];
    if (region < 0) return {predict(*np.tree, x), 0.0};
    return np.regions[static_cast<std::size_t>(region)].moments;
}

} // namespace treevimp
