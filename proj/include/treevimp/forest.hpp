#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "treevimp/dataset.hpp"
#include "treevimp/noising.hpp"
#include "treevimp/tree.hpp"

namespace treevimp {

struct ForestConfig {
    int num_trees = 1;
    int mtry = 0;                 // 0 = all variables
    bool bootstrap = false;
    int min_node_size = 5;
    std::uint64_t seed = 0;
};

struct Forest {
    std::vector<Tree> trees;
    // Bootstrap draws per tree (size n, with replacement); empty vectors
    // when bootstrap is off.
    std::vector<std::vector<std::size_t>> inbag;
    ForestConfig config;

    int num_trees() const { return static_cast<int>(trees.size()); }
};

// Grows config.num_trees trees, tree b from the rng stream
// derive_stream(config.seed, b); with bootstrap on, the resample is drawn
// from that same stream before growing. Identical inputs reproduce the
// identical forest regardless of thread count. `threads` <= 0 uses the
// OpenMP default.
Forest grow_forest(const Dataset& data, const ForestConfig& config, int threads = 0);

double forest_predict(const Forest& forest, std::span<const double> x);

struct OobResult {
    double mse = 0.0;
    int skipped_rows = 0;    // rows in-bag for every tree
};

// Out-of-bag error: each row is predicted by averaging only the trees whose
// bootstrap sample missed it. Throws "no out-of-bag data" if bootstrap was
// off.
OobResult oob_mse(const Forest& forest, const Dataset& data);

// Per-tree exact noised predictors for a common variable set.
struct ForestNoisedPredictor {
    std::vector<NoisedPredictor> per_tree;
};

ForestNoisedPredictor build_forest_noised_predictor(const Forest& forest, std::span<const int> vars);

// Sampled forest noised prediction: averages per-tree samples, each tree
// taking independent coin flips.
double forest_noised_predict(const Forest& forest, std::span<const double> x,
                             std::span<const int> vars, NoisingMode mode, Rng& rng);

// Exact moments of the averaged noised prediction: mean of per-tree means,
// and B^-2 times the sum of per-tree variances (independent randomizations).
Moments forest_noised_moments(const ForestNoisedPredictor& fnp, const Forest& forest,
                              std::span<const double> x);

// JSON schema: { "config": {...}, "trees": [tree schema...],
//                "inbag": [[row indices]...] }
std::string forest_to_json(const Forest& forest);
Forest forest_from_json(const std::string& text);

} // namespace treevimp
