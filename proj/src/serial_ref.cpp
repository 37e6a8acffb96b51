#include "treevimp/serial_ref.hpp"

#include <cmath>
#include <stdexcept>

namespace treevimp::serial {

namespace {

VimpResult summarize(const std::vector<double>& deltas, VimpMethod method) {
    VimpResult out;
    out.method = method;
    double sum = 0.0;
    for (double d : deltas) sum += d;
    out.delta = sum / static_cast<double>(deltas.size());
    if (deltas.size() >= 2) {
        double ss = 0.0;
        for (double d : deltas) ss += (d - out.delta) * (d - out.delta);
        out.std_error = std::sqrt(ss / static_cast<double>(deltas.size() * (deltas.size() - 1)));
    }
    return out;
}

} // namespace

Forest grow_forest(const Dataset& data, const ForestConfig& config) {
    data.validate();
    if (config.num_trees < 1) throw std::runtime_error("forest needs at least one tree");
    Forest forest;
    forest.config = config;
    forest.trees.reserve(static_cast<std::size_t>(config.num_trees));
    forest.inbag.resize(static_cast<std::size_t>(config.num_trees));
    for (int b = 0; b < config.num_trees; ++b) {
        Rng rng(derive_stream(config.seed, static_cast<std::uint64_t>(b)));
        const Dataset* train = &data;
        Dataset boot;
        if (config.bootstrap) {
            auto& draws = forest.inbag[static_cast<std::size_t>(b)];
            draws.resize(data.num_rows);
            for (std::size_t i = 0; i < data.num_rows; ++i) draws[i] = rng.uniform_int(data.num_rows);
            boot = data.subset(draws);
            train = &boot;
        }
        GrowConfig gc;
        gc.min_node_size = config.min_node_size;
        if (config.mtry > 0) gc.mtry = config.mtry;
        forest.trees.push_back(grow_tree(*train, gc, rng));
    }
    return forest;
}

VimpResult delta_mc(const Tree& tree, std::span<const int> vars, const Dataset& test,
                    int replicates, NoisingMode mode, Rng& rng) {
    if (test.num_rows == 0) throw std::runtime_error("empty test data");
    if (replicates < 1) throw std::runtime_error("need at least one replicate");
    const double base = mse(tree, test);
    const std::uint64_t root_stream = rng.next_u64();
    std::vector<double> deltas;
    deltas.reserve(static_cast<std::size_t>(replicates));
    for (int r = 0; r < replicates; ++r) {
        Rng rep(derive_stream(root_stream, static_cast<std::uint64_t>(r)));
        double sum = 0.0;
        for (std::size_t i = 0; i < test.num_rows; ++i) {
            const double err =
                test.y(i) - noised_predict_sample(tree, {test.row(i), test.dim}, vars, mode, rep);
            sum += err * err;
        }
        deltas.push_back(sum / static_cast<double>(test.num_rows) - base);
    }
    return summarize(deltas, VimpMethod::MonteCarlo);
}

VimpResult permutation_vimp(const Forest& forest, const Dataset& test, std::span<const int> vars,
                            int replicates, Rng& rng) {
    if (test.num_rows < 2) throw std::runtime_error("permutation needs at least two test rows");
    if (replicates < 1) throw std::runtime_error("need at least one replicate");
    const double base = mse(forest, test);
    const std::uint64_t root_stream = rng.next_u64();
    std::vector<double> deltas;
    deltas.reserve(static_cast<std::size_t>(replicates));
    for (int r = 0; r < replicates; ++r) {
        Rng rep(derive_stream(root_stream, static_cast<std::uint64_t>(r)));
        Dataset permuted = test;
        for (int v : vars) {
            const std::vector<std::size_t> perm = rep.permutation(test.num_rows);
            for (std::size_t i = 0; i < test.num_rows; ++i)
                permuted.x(i, static_cast<std::size_t>(v)) = test.x(perm[i], static_cast<std::size_t>(v));
        }
        deltas.push_back(mse(forest, permuted) - base);
    }
    return summarize(deltas, VimpMethod::PermutationProxy);
}

} // namespace treevimp::serial
