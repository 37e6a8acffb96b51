#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "treevimp/dataset.hpp"
#include "treevimp/tree.hpp"

namespace treevimp {

// A maximal v-subtree: rooted at an internal node splitting on `variable`
// with no ancestor splitting on the same variable. `terminals` are the
// terminal labels reachable from the root; `depths[i]` is L_m for
// terminals[i], the number of internal nodes on the path from the subtree
// root to the terminal, counting the root itself.
struct MaximalSubtree {
    int variable = 0;
    int root = 0;
    std::vector<int> terminals;
    std::vector<int> depths;
};

// Discrete law of the terminal value reached by fair left-right coin flips
// through a subtree: the terminal at flip depth L gets mass 2^(-L).
struct PathDistribution {
    struct Atom {
        int terminal = 0;
        double value = 0.0;
        double mass = 0.0;
    };
    std::vector<Atom> atoms;

    double mass_sum() const {
        double s = 0.0;
        for (const Atom& a : atoms) s += a.mass;
        return s;
    }
};

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

// Outermost maximal v- and w-subtrees of one tree. A maximal v-subtree whose
// root lies strictly inside a maximal w-subtree moves to dropped_v, and
// symmetrically; kept subtrees have pairwise disjoint terminal sets.
struct PairedSubtrees {
    std::vector<MaximalSubtree> kept_v;
    std::vector<MaximalSubtree> kept_w;
    std::vector<MaximalSubtree> dropped_v;
    std::vector<MaximalSubtree> dropped_w;
};

// Probability a fresh covariate vector lands in each terminal, index label-1.
struct PiWeights {
    std::vector<double> weights;

    double at(int label) const { return weights[static_cast<std::size_t>(label) - 1]; }
    double sum() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

std::vector<MaximalSubtree> maximal_subtrees(const Tree& tree, int variable);

PairedSubtrees paired_maximal_subtrees(const Tree& tree, int v, int w);

// `values` is indexed by terminal label - 1 and must cover every terminal
// of the subtree.
PathDistribution path_distribution(const MaximalSubtree& subtree, std::span<const double> values);

Moments subtree_moments(const PathDistribution& pd);

// Node mean squared error theta_0 for one maximal subtree: the pi-weighted
// expected squared deviation between the random path value and each
// terminal's value, sum_m pi_m * E[(a_tilde - values0[m])^2].
double node_mse(const MaximalSubtree& subtree, std::span<const double> values0, const PiWeights& pi);

// Empirical membership frequencies of `sample` (unreached terminals get 0).
PiWeights estimate_pi(const Tree& tree, const Dataset& sample);

// Exact membership probabilities for a product-uniform design on `box`
// (per-dimension low/high bounds), by interval propagation along each
// root-to-terminal path.
struct Interval {
    double low = 0.0;
    double high = 1.0;
};
PiWeights exact_pi_uniform(const Tree& tree, std::span<const Interval> box);

} // namespace treevimp
