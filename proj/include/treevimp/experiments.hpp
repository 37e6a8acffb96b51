#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "treevimp/dataset.hpp"
#include "treevimp/report.hpp"

namespace treevimp {

// Settings of the replicated train/test permutation protocol.
struct ProtocolConfig {
    double train_fraction = 0.63;
    int num_trees = 1000;
    int mtry = 3;
    int replicates = 1000;
    int min_node_size = 5;
    std::uint64_t seed = 0;
    int threads = 0;
};

// Per-replicate values for --dump-replicates: one row per (replicate,
// target), in replicate-major order.
struct ReplicateDump {
    struct Entry {
        int dataset = 0;
        int replicate = 0;
        std::string label;
        double delta = 0.0;
    };
    std::vector<Entry> entries;

    std::string to_csv() const;
};

// Replicated protocol over a fixed dataset: per replicate, a fresh
// train/test split, a bootstrap forest on the training part, and one
// permutation-proxy measurement per single variable and per pair on the
// test part. Pair rows are ordered by `pair_order` over variable indices.
enum class PairOrder { ByImportance, ByIndex };

AssociationTable run_pair_protocol(const Dataset& data, const ProtocolConfig& config,
                                   PairOrder pair_order, ReplicateDump* dump = nullptr);

// The air pollution experiment: cube-root-transformed Ozone response,
// complete-case rows, pairs ordered by decreasing single-variable VIMP.
AssociationTable run_airquality(const Dataset& airquality, const ProtocolConfig& config,
                                ReplicateDump* dump = nullptr);

struct SimulationConfig {
    int n = 100;
    int num_datasets = 100;
    bool pure_noise = false;    // zero all signal coefficients
};

// The simulation experiment: num_datasets draws of
//   Y = 30 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 20 x1 x4 + 5 x5 + eps,
// x1..x6 iid uniform on [0,1] and eps standard normal; the protocol runs on
// each dataset and the tables average across datasets. Variables are
// labeled a-f and pairs ordered by index.
AssociationTable run_simulation(const ProtocolConfig& config, const SimulationConfig& sim,
                                ReplicateDump* dump = nullptr);

Dataset draw_simulation_dataset(int n, bool pure_noise, std::uint64_t seed);

// ---- theory checks ------------------------------------------------------

struct TheoryCheckOptions {
    std::uint64_t seed = 1;
    int trials = 100;
    int threads = 0;
    // Test hook: perturbs the node mean squared error inside the
    // formula-limit identity check so it must fail (negative control).
    bool corrupt_theta0 = false;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    double worst_residual = 0.0;
    std::string detail;
};

// Runs the invariant and identity suites on `trials` random trees, forests
// and datasets. Failures are report content, not exceptions.
std::vector<CheckResult> run_theory_checks(const TheoryCheckOptions& options);

} // namespace treevimp
