#include "treevimp/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace treevimp {

namespace {

// Reusable per-variable scratch for the split sweep.
struct SplitScratch {
    std::vector<std::pair<double, double>> pairs;   // (x value, response)
};

// Sweep the sorted (value, y) pairs of one variable. The SSE reduction of a
// cut with left sums (n_L, S_L) is S_L^2/n_L + S_R^2/n_R - S^2/n, since the
// response sum of squares cancels. Returns true if some admissible cut beats
// `best` (strict improvement keeps the earliest variable and smallest cut on
// ties).
bool sweep_variable(SplitScratch& scratch, int min_node_size, double total_sum,
                    double parent_term, double& best, double& best_cut) {
    auto& pairs = scratch.pairs;
    std::sort(pairs.begin(), pairs.end());
    const std::size_t n = pairs.size();
    bool improved = false;
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += pairs[i].second;
        if (pairs[i].first == pairs[i + 1].first) continue;   // not a boundary
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < static_cast<std::size_t>(min_node_size)) continue;
        if (n_right < static_cast<std::size_t>(min_node_size)) break;
        const double right_sum = total_sum - left_sum;
        const double reduction = left_sum * left_sum / static_cast<double>(n_left) +
                                 right_sum * right_sum / static_cast<double>(n_right) - parent_term;
        if (reduction > best) {
            best = reduction;
            best_cut = pairs[i].first;
            improved = true;
        }
    }
    return improved;
}

} // namespace

std::optional<SplitChoice> best_split(const Dataset& data, std::span<const std::size_t> rows,
                                      std::span<const int> candidate_vars, int min_node_size) {
    if (rows.empty()) throw std::runtime_error("best_split: no rows");

    double total_sum = 0.0;
    for (std::size_t r : rows) total_sum += data.y(r);
    const double parent_term = total_sum * total_sum / static_cast<double>(rows.size());

    SplitScratch scratch;
    scratch.pairs.reserve(rows.size());
    SplitChoice choice;
    double best = 0.0;   // a zero-reduction split is rejected
    bool found = false;
    for (int v : candidate_vars) {
        scratch.pairs.clear();
        for (std::size_t r : rows) scratch.pairs.emplace_back(data.x(r, v), data.y(r));
        double cut = 0.0;
        if (sweep_variable(scratch, min_node_size, total_sum, parent_term, best, cut)) {
            choice.var = v;
            choice.cut = cut;
            found = true;
        }
    }
    if (!found) return std::nullopt;
    choice.sse_reduction = best;
    return choice;
}

namespace {

struct Grower {
    const Dataset& data;
    const GrowConfig& config;
    Rng& rng;
    Tree tree;
    int next_label = 1;
    std::vector<int> all_vars;

    Grower(const Dataset& d, const GrowConfig& c, Rng& r) : data(d), config(c), rng(r) {
        all_vars.resize(d.dim);
        std::iota(all_vars.begin(), all_vars.end(), 0);
    }

    int make_terminal(std::span<const std::size_t> rows, int parent) {
        double sum = 0.0;
        for (std::size_t r : rows) sum += data.y(r);
        Node n;
        n.parent = parent;
        n.label = next_label++;
        n.value = sum / static_cast<double>(rows.size());
        n.count = static_cast<int>(rows.size());
        tree.nodes.push_back(n);
        return static_cast<int>(tree.nodes.size()) - 1;
    }

    std::vector<int> candidates() {
        const int d = static_cast<int>(data.dim);
        if (!config.mtry || *config.mtry >= d) return all_vars;
        return rng.sample_without_replacement(d, *config.mtry);
    }

    int grow(std::vector<std::size_t>& rows, int depth, int parent) {
        const bool too_small = rows.size() < 2 * static_cast<std::size_t>(config.min_node_size);
        const bool at_depth = config.max_depth && depth >= *config.max_depth;
        bool constant = true;
        for (std::size_t r : rows)
            if (data.y(r) != data.y(rows.front())) {
                constant = false;
                break;
            }
        if (too_small || at_depth || constant) return make_terminal(rows, parent);

        const std::vector<int> vars = candidates();
        const auto split = best_split(data, rows, vars, config.min_node_size);
        if (!split) return make_terminal(rows, parent);

        const int id = static_cast<int>(tree.nodes.size());
        Node n;
        n.split_var = split->var;
        n.cut = split->cut;
        n.parent = parent;
        tree.nodes.push_back(n);

        std::vector<std::size_t> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        for (std::size_t r : rows)
            (data.x(r, split->var) <= split->cut ? left_rows : right_rows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        const int left = grow(left_rows, depth + 1, id);
        tree.nodes[id].left = left;
        const int right = grow(right_rows, depth + 1, id);
        tree.nodes[id].right = right;
        return id;
    }
};

} // namespace

Tree grow_tree(const Dataset& data, const GrowConfig& config, Rng& rng) {
    data.validate();
    if (config.mtry && (*config.mtry < 1 || *config.mtry > static_cast<int>(data.dim)))
        throw std::runtime_error("mtry out of range");
    if (config.min_node_size < 1) throw std::runtime_error("min_node_size must be >= 1");

    Grower grower(data, config, rng);
    std::vector<std::size_t> rows(data.num_rows);
    std::iota(rows.begin(), rows.end(), 0);
    grower.grow(rows, 0, -1);
    grower.tree.dim = static_cast<int>(data.dim);
    grower.tree.num_terminals = grower.next_label - 1;
    return std::move(grower.tree);
}

Tree grow_tree(const Dataset& data, const GrowConfig& config) {
    Rng rng(config.seed);
    return grow_tree(data, config, rng);
}

} // namespace treevimp
