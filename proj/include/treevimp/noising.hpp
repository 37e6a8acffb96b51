#pragma once

#include <span>
#include <vector>

#include "treevimp/rng.hpp"
#include "treevimp/subtree.hpp"
#include "treevimp/tree.hpp"

namespace treevimp {

// FullRandom: once a split on a noised variable is met, every node below is
// a fair coin flip. SplitsOnly: only nodes splitting on a noised variable
// flip; all other nodes keep following x.
enum class NoisingMode { FullRandom, SplitsOnly };

// Exact (closed form) noised-up predictor for one tree and one or two noised
// variables. Each randomized region is a maximal subtree together with the
// path distribution over the tree's fitted values; outside every region the
// predictor coincides with the base tree.
struct NoisedPredictor {
    struct Region {
        MaximalSubtree subtree;
        PathDistribution pd;
        Moments moments;
    };

    const Tree* tree = nullptr;
    std::vector<int> vars;
    std::vector<Region> regions;
    std::vector<int> region_of_label;   // index label-1, -1 = deterministic

    bool in_region(int label) const { return region_of_label[static_cast<std::size_t>(label) - 1] >= 0; }
};

// One sampled prediction of the random tree T_v (or T_t for a pair).
double noised_predict_sample(const Tree& tree, std::span<const double> x,
                             std::span<const int> vars, NoisingMode mode, Rng& rng);

// Same walk, returning the terminal label instead of its value.
int noised_membership_sample(const Tree& tree, std::span<const double> x,
                             std::span<const int> vars, NoisingMode mode, Rng& rng);

// FullRandom closed form. For one variable the regions are the maximal
// v-subtrees; for a pair they are the kept subtrees of
// paired_maximal_subtrees (nested subtrees fold into the outer one).
NoisedPredictor build_noised_predictor(const Tree& tree, std::span<const int> vars);

// Mean and variance of the noised prediction at x: the region's path-
// distribution moments inside a region, (predict(x), 0) outside all regions.
Moments noised_moments_at(const NoisedPredictor& np, std::span<const double> x);

} // namespace treevimp
