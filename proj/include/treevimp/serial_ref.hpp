#pragma once

// Plain single-threaded reference implementations of the parallel kernels.
// Kept deliberately simple; tests assert the OpenMP paths reproduce these
// bit for bit, and the benchmark compares the two.

#include <span>
#include <vector>

#include "treevimp/dataset.hpp"
#include "treevimp/forest.hpp"
#include "treevimp/vimp.hpp"

namespace treevimp::serial {

Forest grow_forest(const Dataset& data, const ForestConfig& config);

VimpResult delta_mc(const Tree& tree, std::span<const int> vars, const Dataset& test,
                    int replicates, NoisingMode mode, Rng& rng);

VimpResult permutation_vimp(const Forest& forest, const Dataset& test, std::span<const int> vars,
                            int replicates, Rng& rng);

} // namespace treevimp::serial
