#include "treevimp/forest.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json_detail.hpp"

namespace treevimp {

namespace {

// Bootstrap draws and tree growth share one derived stream so a tree's
// randomness is fully determined by (config.seed, tree index).
Tree grow_one(const Dataset& data, const ForestConfig& config, std::uint64_t stream,
              std::vector<std::size_t>& inbag_out) {
    Rng rng(stream);
    const Dataset* train = &data;
    Dataset boot;
    if (config.bootstrap) {
        inbag_out.resize(data.num_rows);
        for (std::size_t i = 0; i < data.num_rows; ++i)
            inbag_out[i] = rng.uniform_int(data.num_rows);
        boot = data.subset(inbag_out);
        train = &boot;
    }
    GrowConfig gc;
    gc.min_node_size = config.min_node_size;
    if (config.mtry > 0) gc.mtry = config.mtry;
    return grow_tree(*train, gc, rng);
}

} // namespace

Forest grow_forest(const Dataset& data, const ForestConfig& config, int threads) {
    data.validate();
    if (config.num_trees < 1) throw std::runtime_error("forest needs at least one tree");
    Forest forest;
    forest.config = config;
    forest.trees.resize(static_cast<std::size_t>(config.num_trees));
    forest.inbag.resize(static_cast<std::size_t>(config.num_trees));

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
    // Per-tree streams make the result identical for any thread count.
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < config.num_trees; ++b) {
        const std::uint64_t stream = derive_stream(config.seed, static_cast<std::uint64_t>(b));
        forest.trees[static_cast<std::size_t>(b)] =
            grow_one(data, config, stream, forest.inbag[static_cast<std::size_t>(b)]);
    }
    return forest;
}

double forest_predict(const Forest& forest, std::span<const double> x) {
    double sum = 0.0;
    for (const Tree& tree : forest.trees) sum += predict(tree, x);
    return sum / static_cast<double>(forest.trees.size());
}

OobResult oob_mse(const Forest& forest, const Dataset& data) {
    if (!forest.config.bootstrap) throw std::runtime_error("no out-of-bag data");
    const std::size_t n = data.num_rows;
    std::vector<std::vector<bool>> inbag_mask(forest.trees.size(), std::vector<bool>(n, false));
    for (std::size_t b = 0; b < forest.trees.size(); ++b) {
        if (forest.inbag[b].size() != n) throw std::runtime_error("in-bag record size mismatch");
        for (std::size_t draw : forest.inbag[b]) inbag_mask[b][draw] = true;
    }
    OobResult out{0.0, 0};
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t b = 0; b < forest.trees.size(); ++b) {
            if (inbag_mask[b][i]) continue;
            sum += predict(forest.trees[b], {data.row(i), data.dim});
            ++count;
        }
        if (count == 0) {
            ++out.skipped_rows;
            continue;
        }
        const double err = data.y(i) - sum / static_cast<double>(count);
        out.mse += err * err;
        ++used;
    }
    if (used == 0) throw std::runtime_error("no out-of-bag data");
    out.mse /= static_cast<double>(used);
    return out;
}

ForestNoisedPredictor build_forest_noised_predictor(const Forest& forest,
                                                    std::span<const int> vars) {
    ForestNoisedPredictor fnp;
    fnp.per_tree.reserve(forest.trees.size());
    for (const Tree& tree : forest.trees)
        fnp.per_tree.push_back(build_noised_predictor(tree, vars));
    return fnp;
}

double forest_noised_predict(const Forest& forest, std::span<const double> x,
                             std::span<const int> vars, NoisingMode mode, Rng& rng) {
    double sum = 0.0;
    for (const Tree& tree : forest.trees) sum += noised_predict_sample(tree, x, vars, mode, rng);
    return sum / static_cast<double>(forest.trees.size());
}

Moments forest_noised_moments(const ForestNoisedPredictor& fnp, const Forest& forest,
                              std::span<const double> x) {
    if (fnp.per_tree.size() != forest.trees.size())
        throw std::runtime_error("noised predictor does not match forest");
    const double b = static_cast<double>(fnp.per_tree.size());
    Moments out{0.0, 0.0};
    for (const NoisedPredictor& np : fnp.per_tree) {
        const Moments m = noised_moments_at(np, x);
        out.mean += m.mean;
        out.variance += m.variance;
    }
    out.mean /= b;
    out.variance /= b * b;   // trees are noised independently
    return out;
}

std::string forest_to_json(const Forest& forest) {
    nlohmann::json j;
    j["config"] = {{"num_trees", forest.config.num_trees},
                   {"mtry", forest.config.mtry},
                   {"bootstrap", forest.config.bootstrap},
                   {"min_node_size", forest.config.min_node_size},
                   {"seed", forest.config.seed}};
    j["trees"] = nlohmann::json::array();
    for (const Tree& tree : forest.trees) j["trees"].push_back(tree_to_json_object(tree));
    j["inbag"] = forest.inbag;
    return j.dump(2) + "\n";
}

Forest forest_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Forest forest;
    const auto& c = j.at("config");
    forest.config.num_trees = c.at("num_trees").get<int>();
    forest.config.mtry = c.at("mtry").get<int>();
    forest.config.bootstrap = c.at("bootstrap").get<bool>();
    forest.config.min_node_size = c.at("min_node_size").get<int>();
    forest.config.seed = c.at("seed").get<std::uint64_t>();
    for (const auto& jt : j.at("trees"))
        forest.trees.push_back(tree_from_json_object(jt));
    forest.inbag = j.at("inbag").get<std::vector<std::vector<std::size_t>>>();
    if (forest.trees.empty()) throw std::runtime_error("forest needs at least one tree");
    if (forest.trees.size() != static_cast<std::size_t>(forest.config.num_trees))
        throw std::runtime_error("tree count does not match config");
    return forest;
}

} // namespace treevimp
