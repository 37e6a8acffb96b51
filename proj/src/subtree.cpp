#include "treevimp/subtree.hpp"

#include <cmath>
#include <stdexcept>

namespace treevimp {

namespace {

// Collect terminal labels and flip depths below `root`. Depth counts the
// internal nodes on the path from `root` to the terminal, root included.
void collect_terminals(const Tree& tree, int root, MaximalSubtree& out) {
    struct Frame {
        int id;
        int depth;
    };
    std::vector<Frame> stack{{root, 0}};
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        const Node& n = tree.nodes[f.id];
        if (n.is_terminal()) {
            out.terminals.push_back(n.label);
            out.depths.push_back(f.depth);
        } else {
            stack.push_back({n.right, f.depth + 1});
            stack.push_back({n.left, f.depth + 1});
        }
    }
}

bool is_strict_descendant(const Tree& tree, int node, int ancestor) {
    int id = tree.nodes[node].parent;
    while (id >= 0) {
        if (id == ancestor) return true;
        id = tree.nodes[id].parent;
    }
    return false;
}

} // namespace

std::vector<MaximalSubtree> maximal_subtrees(const Tree& tree, int variable) {
    if (variable < 0 || variable >= tree.dim) throw std::runtime_error("variable index out of range");
    std::vector<MaximalSubtree> result;
    // Depth-first from the root; the first node splitting on the variable
    // along any path starts a maximal subtree, and the search does not
    // descend into it again.
    std::vector<int> stack{tree.root};
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        const Node& n = tree.nodes[id];
        if (n.is_terminal()) continue;
        if (n.split_var == variable) {
            MaximalSubtree st;
            st.variable = variable;
            st.root = id;
            collect_terminals(tree, id, st);
            result.push_back(std::move(st));
        } else {
            stack.push_back(n.right);
            stack.push_back(n.left);
        }
    }
    return result;
}

PairedSubtrees paired_maximal_subtrees(const Tree& tree, int v, int w) {
    if (v == w) throw std::runtime_error("identical pair");
    PairedSubtrees out;
    std::vector<MaximalSubtree> v_subtrees = maximal_subtrees(tree, v);
    std::vector<MaximalSubtree> w_subtrees = maximal_subtrees(tree, w);
    // Nesting is the only possible overlap, so a subtree is dropped exactly
    // when its root sits strictly inside a subtree of the other variable.
    // (Nesting inside a dropped subtree cannot occur: it would put two
    // maximal subtrees of one variable inside each other.)
    auto nested_in = [&](const MaximalSubtree& st, const std::vector<MaximalSubtree>& others) {
        for (const MaximalSubtree& other : others)
            if (is_strict_descendant(tree, st.root, other.root)) return true;
        return false;
    };
    std::vector<bool> v_nested, w_nested;
    for (const MaximalSubtree& st : v_subtrees) v_nested.push_back(nested_in(st, w_subtrees));
    for (const MaximalSubtree& st : w_subtrees) w_nested.push_back(nested_in(st, v_subtrees));
    for (std::size_t i = 0; i < v_subtrees.size(); ++i)
        (v_nested[i] ? out.dropped_v : out.kept_v).push_back(std::move(v_subtrees[i]));
    for (std::size_t i = 0; i < w_subtrees.size(); ++i)
        (w_nested[i] ? out.dropped_w : out.kept_w).push_back(std::move(w_subtrees[i]));
    return out;
}

PathDistribution path_distribution(const MaximalSubtree& subtree, std::span<const double> values) {
    PathDistribution pd;
    pd.atoms.reserve(subtree.terminals.size());
    for (std::size_t i = 0; i < subtree.terminals.size(); ++i) {
        const int label = subtree.terminals[i];
        if (label < 1 || static_cast<std::size_t>(label) > values.size())
            throw std::runtime_error("path_distribution: missing value for terminal");
        pd.atoms.push_back({label, values[static_cast<std::size_t>(label) - 1],
                            std::ldexp(1.0, -subtree.depths[i])});
    }
    return pd;
}

Moments subtree_moments(const PathDistribution& pd) {
    Moments m;
    for (const auto& atom : pd.atoms) m.mean += atom.mass * atom.value;
    for (const auto& atom : pd.atoms) {
        const double dev = atom.value - m.mean;
        m.variance += atom.mass * dev * dev;
    }
    return m;
}

double node_mse(const MaximalSubtree& subtree, std::span<const double> values0, const PiWeights& pi) {
    const PathDistribution pd = path_distribution(subtree, values0);
    const Moments m = subtree_moments(pd);
    double theta = 0.0;
    for (int label : subtree.terminals) {
        if (static_cast<std::size_t>(label) > pi.weights.size())
            throw std::runtime_error("node_mse: pi does not cover the subtree");
        const double dev = m.mean - values0[static_cast<std::size_t>(label) - 1];
        theta += pi.at(label) * (m.variance + dev * dev);
    }
    return theta;
}

PiWeights estimate_pi(const Tree& tree, const Dataset& sample) {
    if (sample.num_rows == 0) throw std::runtime_error("empty sample");
    PiWeights pi;
    pi.weights.assign(tree.num_terminals, 0.0);
    for (std::size_t i = 0; i < sample.num_rows; ++i) {
        const int label = node_membership(tree, std::span<const double>(sample.row(i), sample.dim));
        pi.weights[static_cast<std::size_t>(label) - 1] += 1.0;
    }
    for (double& w : pi.weights) w /= static_cast<double>(sample.num_rows);
    return pi;
}

PiWeights exact_pi_uniform(const Tree& tree, std::span<const Interval> box) {
    if (static_cast<int>(box.size()) != tree.dim) throw std::runtime_error("box dimension mismatch");
    for (const Interval& iv : box)
        if (!(iv.low < iv.high)) throw std::runtime_error("degenerate box");

    PiWeights pi;
    pi.weights.assign(tree.num_terminals, 0.0);

    struct Frame {
        int id;
        std::vector<Interval> bounds;
    };
    std::vector<Frame> stack;
    stack.push_back({tree.root, std::vector<Interval>(box.begin(), box.end())});
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        const Node& n = tree.nodes[f.id];
        if (n.is_terminal()) {
            double fraction = 1.0;
            for (std::size_t j = 0; j < box.size(); ++j)
                fraction *= std::max(0.0, f.bounds[j].high - f.bounds[j].low) /
                            (box[j].high - box[j].low);
            pi.weights[static_cast<std::size_t>(n.label) - 1] = fraction;
            continue;
        }
        Frame left{n.left, f.bounds};
        left.bounds[n.split_var].high = std::min(left.bounds[n.split_var].high, n.cut);
        Frame right{n.right, std::move(f.bounds)};
        right.bounds[n.split_var].low = std::max(right.bounds[n.split_var].low, n.cut);
        stack.push_back(std::move(right));
        stack.push_back(std::move(left));
    }
    return pi;
}

} // namespace treevimp
