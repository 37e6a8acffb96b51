#include "treevimp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include "treevimp/csv.hpp"
#include "treevimp/forest.hpp"
#include "treevimp/vimp.hpp"

namespace treevimp {

// ---- replicate dump --------------------------------------------------------

std::string ReplicateDump::to_csv() const {
    std::string out = "dataset,replicate,label,delta\n";
    char buf[128];
    for (const Entry& e : entries) {
        std::snprintf(buf, sizeof buf, "%d,%d,%s,%.10g\n", e.dataset, e.replicate,
                      e.label.c_str(), e.delta);
        out += buf;
    }
    return out;
}

// ---- the replicated permutation protocol ------------------------------------

namespace {

std::string pair_label(const Dataset& data, std::size_t v, std::size_t w) {
    return data.column_names[v] + ":" + data.column_names[w];
}

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", value);
    return buf;
}

} // namespace

AssociationTable run_pair_protocol(const Dataset& data, const ProtocolConfig& config,
                                   PairOrder pair_order, ReplicateDump* dump) {
    data.validate();
    if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0))
        throw std::runtime_error("train fraction must lie in (0, 1)");
    if (config.replicates < 1) throw std::runtime_error("need at least one replicate");
    const std::size_t n = data.num_rows;
    const std::size_t d = data.dim;
    if (d < 2) throw std::runtime_error("pair protocol needs at least two variables");
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(config.train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 2);   // test keeps >= 2 rows

    std::vector<double> single_sum(d, 0.0);
    std::vector<double> pair_sum(d * d, 0.0);   // upper triangle v < w
    double oob_sum = 0.0;

    for (int r = 0; r < config.replicates; ++r) {
        Rng rep(derive_stream(config.seed, static_cast<std::uint64_t>(r)));
        const std::vector<std::size_t> perm = rep.permutation(n);
        const Dataset train = data.subset({perm.begin(), perm.begin() + static_cast<long>(n_train)});
        const Dataset test = data.subset({perm.begin() + static_cast<long>(n_train), perm.end()});

        ForestConfig fc;
        fc.num_trees = config.num_trees;
        fc.mtry = config.mtry;
        fc.bootstrap = true;
        fc.min_node_size = config.min_node_size;
        fc.seed = rep.next_u64();
        const Forest forest = grow_forest(train, fc, config.threads);
        oob_sum += oob_mse(forest, train).mse;

        for (std::size_t v = 0; v < d; ++v) {
            const int vars[1] = {static_cast<int>(v)};
            const double delta = permutation_vimp(forest, test, vars, 1, rep, config.threads).delta;
            single_sum[v] += delta;
            if (dump) dump->entries.push_back({0, r, data.column_names[v], delta});
        }
        for (std::size_t v = 0; v < d; ++v) {
            for (std::size_t w = v + 1; w < d; ++w) {
                const int vars[2] = {static_cast<int>(v), static_cast<int>(w)};
                const double delta =
                    permutation_vimp(forest, test, vars, 1, rep, config.threads).delta;
                pair_sum[v * d + w] += delta;
                if (dump) dump->entries.push_back({0, r, pair_label(data, v, w), delta});
            }
        }
    }

    const double rr = static_cast<double>(config.replicates);
    AssociationTable table;
    table.reference_mse = oob_sum / rr;
    table.replicates = config.replicates;
    table.seed = config.seed;
    table.config = {{"train_fraction", format_double(config.train_fraction)},
                    {"num_trees", std::to_string(config.num_trees)},
                    {"mtry", std::to_string(config.mtry)},
                    {"min_node_size", std::to_string(config.min_node_size)},
                    {"pair_order", pair_order == PairOrder::ByImportance ? "importance" : "index"},
                    {"response", data.response_name},
                    // single and pair proxies use independently drawn permutations
                    {"permutations", "independent"}};

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (pair_order == PairOrder::ByImportance)
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return single_sum[a] > single_sum[b];
        });

    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const std::size_t v = std::min(order[i], order[j]);
            const std::size_t w = std::max(order[i], order[j]);
            AssociationTable::Row row;
            row.label = pair_label(data, order[i], order[j]);
            row.paired = pair_sum[v * d + w] / rr;
            row.additive = (single_sum[order[i]] + single_sum[order[j]]) / rr;
            row.association = row.paired - row.additive;
            row.standardized =
                table.reference_mse > 0.0 ? row.association / table.reference_mse * 100.0 : 0.0;
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

AssociationTable run_airquality(const Dataset& airquality, const ProtocolConfig& config,
                                ReplicateDump* dump) {
    Dataset data = airquality;
    for (double& y : data.response) y = std::cbrt(y);
    data.response_name += "^(1/3)";
    AssociationTable table = run_pair_protocol(data, config, PairOrder::ByImportance, dump);
    table.config["missing"] = "complete-case"; // rows with any missing field are dropped upstream
    return table;
}

// ---- simulation --------------------------------------------------------------

Dataset draw_simulation_dataset(int n, bool pure_noise, std::uint64_t seed) {
    Dataset data;
    data.dim = 6;
    data.column_names = {"a", "b", "c", "d", "e", "f"};
    data.response_name = "y";
    Rng rng(seed);
    std::vector<double> xs(6);
    for (int i = 0; i < n; ++i) {
        for (double& x : xs) x = rng.uniform();
        const double eps = rng.normal();
        double y = eps;
        if (!pure_noise)
            y += 30.0 * std::sin(std::numbers::pi * xs[0] * xs[1]) +
                 20.0 * (xs[2] - 0.5) * (xs[2] - 0.5) + 20.0 * xs[0] * xs[3] + 5.0 * xs[4];
        data.add_row(y, xs);
    }
    return data;
}

AssociationTable run_simulation(const ProtocolConfig& config, const SimulationConfig& sim,
                                ReplicateDump* dump) {
    if (sim.n < 10) throw std::runtime_error("simulation needs n >= 10");
    if (sim.num_datasets < 1) throw std::runtime_error("need at least one dataset");
    const std::uint64_t data_root = derive_stream(config.seed, 1);
    const std::uint64_t protocol_root = derive_stream(config.seed, 2);

    AssociationTable total;
    for (int s = 0; s < sim.num_datasets; ++s) {
        const Dataset data =
            draw_simulation_dataset(sim.n, sim.pure_noise, derive_stream(data_root, s));
        ProtocolConfig per = config;
        per.seed = derive_stream(protocol_root, static_cast<std::uint64_t>(s));
        ReplicateDump local;
        const AssociationTable t =
            run_pair_protocol(data, per, PairOrder::ByIndex, dump ? &local : nullptr);
        if (dump)
            for (ReplicateDump::Entry e : local.entries) {
                e.dataset = s;
                dump->entries.push_back(std::move(e));
            }
        if (s == 0) {
            total = t;
        } else {
            for (std::size_t i = 0; i < total.rows.size(); ++i) {
                total.rows[i].paired += t.rows[i].paired;
                total.rows[i].additive += t.rows[i].additive;
            }
            total.reference_mse += t.reference_mse;
        }
    }
    const double ds = static_cast<double>(sim.num_datasets);
    total.reference_mse /= ds;
    for (AssociationTable::Row& row : total.rows) {
        row.paired /= ds;
        row.additive /= ds;
        row.association = row.paired - row.additive;
        row.standardized =
            total.reference_mse > 0.0 ? row.association / total.reference_mse * 100.0 : 0.0;
    }
    total.seed = config.seed;
    total.config["datasets"] = std::to_string(sim.num_datasets);
    total.config["n"] = std::to_string(sim.n);
    total.config["pure_noise"] = sim.pure_noise ? "true" : "false";
    return total;
}

// ---- theory checks -------------------------------------------------------------

namespace {

struct CheckRecorder {
    std::vector<CheckResult>& out;

    void add(std::string name, bool passed, double residual, std::string detail) {
        out.push_back({std::move(name), passed, residual, std::move(detail)});
    }
};

Dataset random_dataset(Rng& rng, std::size_t n, std::size_t d) {
    Dataset data;
    data.dim = d;
    for (std::size_t j = 0; j < d; ++j) data.column_names.push_back("x" + std::to_string(j + 1));
    data.response_name = "y";
    std::vector<double> coef(d);
    for (double& c : coef) c = 4.0 * rng.uniform() - 2.0;
    std::vector<double> xs(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& x : xs) x = rng.uniform();
        double y = rng.normal() * 0.5;
        for (std::size_t j = 0; j < d; ++j) y += coef[j] * xs[j];
        y += 3.0 * xs[0] * xs[d - 1];
        data.add_row(y, xs);
    }
    return data;
}

Tree random_tree(Rng& rng, const Dataset& data) {
    GrowConfig gc;
    gc.min_node_size = rng.coin() ? 5 : 2;
    if (rng.coin()) gc.max_depth = 3 + static_cast<int>(rng.uniform_int(4));
    return grow_tree(data, gc, rng);
}

double rel_residual(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

// Rows of `data` routed to every node (not just terminals).
std::vector<std::vector<std::size_t>> rows_per_node(const Tree& tree, const Dataset& data) {
    std::vector<std::vector<std::size_t>> rows(tree.nodes.size());
    for (std::size_t i = 0; i < data.num_rows; ++i) {
        int id = tree.root;
        rows[static_cast<std::size_t>(id)].push_back(i);
        while (!tree.nodes[static_cast<std::size_t>(id)].is_terminal()) {
            const Node& node = tree.nodes[static_cast<std::size_t>(id)];
            id = data.x(i, static_cast<std::size_t>(node.split_var)) <= node.cut ? node.left
                                                                                 : node.right;
            rows[static_cast<std::size_t>(id)].push_back(i);
        }
    }
    return rows;
}

// Per-terminal means of the test responses, for cross-checking the closed-form
// delta against delta_exact; terminals with no test rows keep the fitted value.
std::vector<double> test_mean_values(const Tree& tree, const Dataset& test) {
    std::vector<double> sums(static_cast<std::size_t>(tree.num_terminals), 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(tree.num_terminals), 0);
    for (std::size_t i = 0; i < test.num_rows; ++i) {
        const std::size_t m =
            static_cast<std::size_t>(node_membership(tree, {test.row(i), test.dim})) - 1;
        sums[m] += test.y(i);
        ++counts[m];
    }
    std::vector<double> out = tree.terminal_values();
    for (std::size_t m = 0; m < out.size(); ++m)
        if (counts[m] > 0) out[m] = sums[m] / static_cast<double>(counts[m]);
    return out;
}

// Tree with a single w-subtree guarding a nested v-subtree, entered only for
// slice_low < x0 <= slice_high; used for the disjoint-across-trees forest
// association identity.
Tree build_sliced_tree(double slice_low, double slice_high, Rng& rng) {
    Tree tree;
    tree.dim = 3;
    auto internal = [&](int var, double cut) {
        Node n;
        n.split_var = var;
        n.cut = cut;
        return n;
    };
    auto terminal = [&]() {
        Node n;
        n.value = 10.0 * rng.uniform() - 5.0;
        n.count = 1;
        return n;
    };
    // Inner shape: w-node (x1) whose left child is a v-node (x2).
    const bool guard_low = slice_low > 0.0;
    const bool guard_high = slice_high < 1.0;
    int next = 0;
    int entry = 0;   // id where the w-subtree attaches
    if (guard_low) {
        tree.nodes.push_back(internal(0, slice_low));
        tree.nodes.push_back(terminal());   // x0 <= slice_low
        tree.nodes[0].left = 1;
        entry = next = 2;
    }
    if (guard_high) {
        tree.nodes.push_back(internal(0, slice_high));
        if (guard_low) tree.nodes[0].right = next;
        tree.nodes.push_back(terminal());   // x0 > slice_high
        tree.nodes[static_cast<std::size_t>(next)].right = next + 1;
        entry = next + 2;
        next += 2;
    } else if (guard_low) {
        tree.nodes[0].right = next;
        entry = next;
    }
    const int w_id = entry;
    tree.nodes.push_back(internal(1, 0.5));
    tree.nodes.push_back(internal(2, 0.5));
    tree.nodes.push_back(terminal());
    tree.nodes.push_back(terminal());
    tree.nodes.push_back(terminal());
    tree.nodes[static_cast<std::size_t>(w_id)].left = w_id + 1;      // v-node
    tree.nodes[static_cast<std::size_t>(w_id)].right = w_id + 4;
    tree.nodes[static_cast<std::size_t>(w_id + 1)].left = w_id + 2;
    tree.nodes[static_cast<std::size_t>(w_id + 1)].right = w_id + 3;
    if (guard_high) tree.nodes[static_cast<std::size_t>(entry - 2)].left = w_id;

    // Parents, then depth-first terminal labels as the grower would assign.
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        const Node& n = tree.nodes[id];
        if (n.is_terminal()) continue;
        tree.nodes[static_cast<std::size_t>(n.left)].parent = static_cast<int>(id);
        tree.nodes[static_cast<std::size_t>(n.right)].parent = static_cast<int>(id);
    }
    int label = 0;
    std::vector<int> stack{tree.root};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        Node& n = tree.nodes[static_cast<std::size_t>(id)];
        if (n.is_terminal())
            n.label = ++label;
        else {
            stack.push_back(n.right);
            stack.push_back(n.left);
        }
    }
    tree.num_terminals = label;
    tree.validate();
    return tree;
}

Dataset uniform_sample(Rng& rng, std::size_t n, std::size_t d) {
    Dataset data;
    data.dim = d;
    for (std::size_t j = 0; j < d; ++j) data.column_names.push_back("x" + std::to_string(j + 1));
    data.response_name = "y";
    std::vector<double> xs(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& x : xs) x = rng.uniform();
        data.add_row(rng.normal(), xs);
    }
    return data;
}

} // namespace

std::vector<CheckResult> run_theory_checks(const TheoryCheckOptions& options) {
    if (options.trials < 1) throw std::runtime_error("need at least one trial");
    std::vector<CheckResult> results;
    CheckRecorder rec{results};
    const int trials = options.trials;
    const int few = std::max(1, std::min(trials, 10));

    // -- partition and membership weights ------------------------------------
    {
        Rng rng(derive_stream(options.seed, 101));
        bool ok = true;
        double worst = 0.0;
        for (int t = 0; t < trials && ok; ++t) {
            const Dataset data = random_dataset(rng, 40 + rng.uniform_int(160), 2 + rng.uniform_int(4));
            const Tree tree = random_tree(rng, data);
            std::vector<double> x(data.dim);
            for (int probe = 0; probe < 50; ++probe) {
                for (double& c : x) c = 3.0 * rng.uniform() - 1.0;   // beyond the data range too
                const int label = node_membership(tree, x);
                if (label < 1 || label > tree.num_terminals) ok = false;
            }
            const Dataset sample = uniform_sample(rng, 400, data.dim);
            worst = std::max(worst, std::abs(estimate_pi(tree, sample).sum() - 1.0));
            std::vector<Interval> box(data.dim, Interval{0.0, 1.0});
            worst = std::max(worst, std::abs(exact_pi_uniform(tree, box).sum() - 1.0));
        }
        ok = ok && worst <= 1e-12;
        rec.add("partition-and-pi", ok, worst,
                "unique membership for arbitrary x; empirical and exact-uniform weights sum to 1");
    }

    // -- training means and monotone impurity ---------------------------------
    {
        Rng rng(derive_stream(options.seed, 102));
        double worst = 0.0;
        double min_reduction = 1e300;
        bool ok = true;
        for (int t = 0; t < trials; ++t) {
            const Dataset data = random_dataset(rng, 40 + rng.uniform_int(160), 2 + rng.uniform_int(4));
            const Tree tree = random_tree(rng, data);
            const auto rows = rows_per_node(tree, data);
            for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
                const Node& node = tree.nodes[id];
                auto stats = [&](const std::vector<std::size_t>& r) {
                    double s = 0.0;
                    for (std::size_t i : r) s += data.y(i);
                    return s;
                };
                if (node.is_terminal()) {
                    const double mean = stats(rows[id]) / static_cast<double>(rows[id].size());
                    worst = std::max(worst, rel_residual(node.value, mean));
                    if (static_cast<std::size_t>(node.count) != rows[id].size()) ok = false;
                } else {
                    const double s = stats(rows[id]);
                    const double sl = stats(rows[static_cast<std::size_t>(node.left)]);
                    const double sr = stats(rows[static_cast<std::size_t>(node.right)]);
                    const double nn = static_cast<double>(rows[id].size());
                    const double nl = static_cast<double>(rows[static_cast<std::size_t>(node.left)].size());
                    const double nr = static_cast<double>(rows[static_cast<std::size_t>(node.right)].size());
                    min_reduction = std::min(min_reduction, sl * sl / nl + sr * sr / nr - s * s / nn);
                }
            }
        }
        ok = ok && worst <= 1e-12 && min_reduction > 0.0;
        rec.add("training-mean-and-impurity", ok, worst,
                "terminal values are training means; every split strictly reduces SSE (min reduction " +
                    format_double(min_reduction) + ")");
    }

    // -- reproducibility -------------------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 103));
        bool ok = true;
        for (int t = 0; t < few && ok; ++t) {
            const Dataset data = random_dataset(rng, 60 + rng.uniform_int(60), 3);
            GrowConfig gc;
            gc.min_node_size = 3;
            gc.mtry = 2;
            gc.seed = rng.next_u64();
            ok = ok && tree_to_json(grow_tree(data, gc)) == tree_to_json(grow_tree(data, gc));
            ForestConfig fc;
            fc.num_trees = 12;
            fc.mtry = 2;
            fc.bootstrap = true;
            fc.seed = rng.next_u64();
            ok = ok && forest_to_json(grow_forest(data, fc, 1)) ==
                           forest_to_json(grow_forest(data, fc, 3));
        }
        rec.add("reproducibility", ok, 0.0,
                "identical config regrows identical trees; forest bytes match across thread counts");
    }

    // -- rectangle construction -------------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 104));
        bool ok = true;
        for (int t = 0; t < trials && ok; ++t) {
            const std::size_t d = 1 + rng.uniform_int(3);
            std::vector<double> cuts(d);
            for (double& c : cuts) c = rng.uniform();
            const Tree tree = rectangle_indicator_tree(cuts);
            if (tree.num_terminals != static_cast<int>(d) + 1) ok = false;
            std::vector<double> x(d);
            for (int probe = 0; probe < 200 && ok; ++probe) {
                for (double& c : x) c = rng.uniform();
                bool inside = true;
                for (std::size_t j = 0; j < d; ++j) inside = inside && x[j] <= cuts[j];
                if (predict(tree, x) != (inside ? 1.0 : 0.0)) ok = false;
            }
        }
        rec.add("rectangle-indicator", ok, 0.0,
                "chain tree has d+1 terminals and reproduces the box indicator exactly");
    }

    // -- maximal subtree structure ------------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 105));
        bool ok = true;
        for (int t = 0; t < trials && ok; ++t) {
            const Dataset data = random_dataset(rng, 60 + rng.uniform_int(200), 2 + rng.uniform_int(4));
            const Tree tree = random_tree(rng, data);
            std::vector<std::pair<int, std::set<int>>> all;   // (root id, terminal set)
            for (int v = 0; v < tree.dim && ok; ++v) {
                std::set<int> seen;
                for (const MaximalSubtree& st : maximal_subtrees(tree, v)) {
                    // maximality: no ancestor splits on v
                    for (int a = tree.nodes[static_cast<std::size_t>(st.root)].parent; a >= 0;
                         a = tree.nodes[static_cast<std::size_t>(a)].parent)
                        if (tree.nodes[static_cast<std::size_t>(a)].split_var == v) ok = false;
                    for (int m : st.terminals)
                        if (!seen.insert(m).second) ok = false;   // disjoint within a variable
                    all.emplace_back(st.root, std::set<int>(st.terminals.begin(), st.terminals.end()));
                }
            }
            for (std::size_t i = 0; i < all.size() && ok; ++i)
                for (std::size_t j = i + 1; j < all.size() && ok; ++j) {
                    std::vector<int> inter;
                    std::set_intersection(all[i].second.begin(), all[i].second.end(),
                                          all[j].second.begin(), all[j].second.end(),
                                          std::back_inserter(inter));
                    const bool disjoint = inter.empty();
                    const bool nested = inter.size() == all[i].second.size() ||
                                        inter.size() == all[j].second.size();
                    if (!disjoint && !nested) ok = false;   // overlap must be containment
                }
            for (int v = 0; v < tree.dim && ok; ++v)
                for (int w = v + 1; w < tree.dim && ok; ++w) {
                    const PairedSubtrees ps = paired_maximal_subtrees(tree, v, w);
                    std::set<int> seen;
                    for (const auto* kept : {&ps.kept_v, &ps.kept_w})
                        for (const MaximalSubtree& st : *kept)
                            for (int m : st.terminals)
                                if (!seen.insert(m).second) ok = false;
                }
        }
        rec.add("maximal-subtrees", ok, 0.0,
                "maximality by ancestor walk; nesting-only overlap; kept pair sets disjoint");
    }

    // -- mass law and theta0 sign ---------------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 106));
        bool ok = true;
        double worst = 0.0;
        for (int t = 0; t < trials && ok; ++t) {
            const Dataset data = random_dataset(rng, 60 + rng.uniform_int(200), 2 + rng.uniform_int(4));
            const Tree tree = random_tree(rng, data);
            const std::vector<double> fitted = tree.terminal_values();
            PiWeights uniform_pi;
            uniform_pi.weights.assign(static_cast<std::size_t>(tree.num_terminals),
                                      1.0 / static_cast<double>(tree.num_terminals));
            for (int v = 0; v < tree.dim && ok; ++v)
                for (const MaximalSubtree& st : maximal_subtrees(tree, v)) {
                    const PathDistribution pd = path_distribution(st, fitted);
                    worst = std::max(worst, std::abs(pd.mass_sum() - 1.0));
                    if (pd.mass_sum() != 1.0) ok = false;   // dyadic masses: exact
                    const double theta = node_mse(st, fitted, uniform_pi);
                    if (theta < 0.0) ok = false;
                    double lo = fitted[static_cast<std::size_t>(st.terminals.front()) - 1];
                    double hi = lo;
                    for (int m : st.terminals) {
                        lo = std::min(lo, fitted[static_cast<std::size_t>(m) - 1]);
                        hi = std::max(hi, fitted[static_cast<std::size_t>(m) - 1]);
                    }
                    if ((theta == 0.0) != (lo == hi)) ok = false;
                    // constant values zero it out exactly
                    const std::vector<double> zeroes(fitted.size(), 0.0);
                    if (node_mse(st, zeroes, uniform_pi) != 0.0) ok = false;
                }
        }
        rec.add("mass-law-and-theta0", ok, worst,
                "path masses sum to exactly 1; theta0 >= 0 with equality iff constant values");
    }

    // -- path distribution Monte Carlo ------------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 107));
        bool ok = true;
        double worst = 0.0;
        const int draws = 100000;
        const double band = 4.0 / std::sqrt(static_cast<double>(draws));
        for (int t = 0; t < few; ++t) {
            const Dataset data = random_dataset(rng, 120 + rng.uniform_int(200), 3);
            const Tree tree = random_tree(rng, data);
            const int v = static_cast<int>(rng.uniform_int(3));
            const auto subtrees = maximal_subtrees(tree, v);
            if (subtrees.empty()) continue;
            const MaximalSubtree& st = subtrees[rng.uniform_int(subtrees.size())];
            std::vector<int> counts(static_cast<std::size_t>(tree.num_terminals), 0);
            for (int s = 0; s < draws; ++s) {
                int id = st.root;
                while (!tree.nodes[static_cast<std::size_t>(id)].is_terminal())
                    id = rng.coin() ? tree.nodes[static_cast<std::size_t>(id)].right
                                    : tree.nodes[static_cast<std::size_t>(id)].left;
                ++counts[static_cast<std::size_t>(tree.nodes[static_cast<std::size_t>(id)].label) - 1];
            }
            const PathDistribution pd = path_distribution(st, tree.terminal_values());
            for (const PathDistribution::Atom& atom : pd.atoms) {
                const double freq = static_cast<double>(counts[static_cast<std::size_t>(atom.terminal) - 1]) /
                                    static_cast<double>(draws);
                worst = std::max(worst, std::abs(freq - atom.mass));
            }
        }
        ok = worst <= band;
        rec.add("path-mass-monte-carlo", ok, worst,
                "random left-right path frequencies match the dyadic masses (band " +
                    format_double(band) + ")");
    }

    // -- noised predictor exactness, locality, degeneracy ------------------------------
    {
        Rng rng(derive_stream(options.seed, 108));
        bool ok = true;
        double worst = 0.0;
        const int draws = 100000;
        const double band = 4.0 / std::sqrt(static_cast<double>(draws));
        for (int t = 0; t < few && ok; ++t) {
            const Dataset data = random_dataset(rng, 120 + rng.uniform_int(120), 3);
            const Tree tree = random_tree(rng, data);
            const int v = static_cast<int>(rng.uniform_int(3));
            const int vars[1] = {v};
            const NoisedPredictor np = build_noised_predictor(tree, vars);

            // find an x inside a region and one outside
            std::vector<double> x_in, x_out;
            for (std::size_t i = 0; i < data.num_rows && (x_in.empty() || x_out.empty()); ++i) {
                const int label = node_membership(tree, {data.row(i), data.dim});
                auto& slot = np.in_region(label) ? x_in : x_out;
                if (slot.empty()) slot.assign(data.row(i), data.row(i) + data.dim);
            }
            if (!x_in.empty()) {
                const int label = node_membership(tree, x_in);
                const NoisedPredictor::Region& region =
                    np.regions[static_cast<std::size_t>(np.region_of_label[static_cast<std::size_t>(label) - 1])];
                std::vector<int> counts(static_cast<std::size_t>(tree.num_terminals), 0);
                for (int s = 0; s < draws; ++s)
                    ++counts[static_cast<std::size_t>(
                                 noised_membership_sample(tree, x_in, vars, NoisingMode::FullRandom, rng)) -
                             1];
                long total_in_region = 0;
                for (const PathDistribution::Atom& atom : region.pd.atoms) {
                    const long c = counts[static_cast<std::size_t>(atom.terminal) - 1];
                    total_in_region += c;
                    worst = std::max(worst, std::abs(static_cast<double>(c) / draws - atom.mass));
                }
                if (total_in_region != draws) ok = false;   // every draw lands inside the region
            }
            if (!x_out.empty()) {
                const int label = node_membership(tree, x_out);
                for (int s = 0; s < 64 && ok; ++s)
                    if (noised_membership_sample(tree, x_out, vars, NoisingMode::FullRandom, rng) != label)
                        ok = false;
            }

            // locality: perturbing values outside every region leaves the regions alone
            Tree perturbed = tree;
            for (Node& n : perturbed.nodes)
                if (n.is_terminal() && !np.in_region(n.label)) n.value += 100.0;
            const NoisedPredictor np2 = build_noised_predictor(perturbed, vars);
            if (np2.regions.size() != np.regions.size()) ok = false;
            for (std::size_t k = 0; ok && k < np.regions.size(); ++k) {
                const auto& a = np.regions[k].pd.atoms;
                const auto& b = np2.regions[k].pd.atoms;
                if (a.size() != b.size()) ok = false;
                for (std::size_t i = 0; ok && i < a.size(); ++i)
                    if (a[i].terminal != b[i].terminal || a[i].value != b[i].value ||
                        a[i].mass != b[i].mass)
                        ok = false;
            }

            // degeneracy: constant values inside each region silence the noise
            Tree flat = tree;
            for (Node& n : flat.nodes)
                if (n.is_terminal() && np.in_region(n.label))
                    n.value = np.regions[static_cast<std::size_t>(
                                             np.region_of_label[static_cast<std::size_t>(n.label) - 1])]
                                  .subtree.root;   // any per-region constant
            for (int probe = 0; probe < 50 && ok; ++probe) {
                std::vector<double> x(data.dim);
                for (double& c : x) c = rng.uniform();
                if (noised_predict_sample(flat, x, vars, NoisingMode::FullRandom, rng) !=
                    predict(flat, x))
                    ok = false;
            }
        }
        ok = ok && worst <= band;
        rec.add("noising-exactness", ok, worst,
                "sampled noising matches region atoms; locality and degenerate-noise identities hold");
    }

    // -- formula-limit identity (negative-control hook lives here) ------------------------
    {
        Rng rng(derive_stream(options.seed, 109));
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const Dataset data = random_dataset(rng, 50 + rng.uniform_int(300), 2 + rng.uniform_int(5));
            const Tree tree = random_tree(rng, data);
            const PiWeights pi = estimate_pi(tree, uniform_sample(rng, 300, data.dim));
            const std::vector<double> fitted = tree.terminal_values();
            for (int v = 0; v < tree.dim; ++v) {
                const double formula = delta_formula(tree, v, SignalSpec::fitted(), pi).delta;
                double limit = delta_limit(tree, v, fitted, pi).delta;
                if (options.corrupt_theta0) limit += 1e-6;
                worst = std::max(worst, rel_residual(formula, limit));
            }
        }
        rec.add("formula-limit-identity", worst < 1e-10, worst,
                "noised-value formula with fitted signal equals the node-mse limit");
    }

    // -- closed-form delta against the exact noised MSE difference --------------------------
    {
        Rng rng(derive_stream(options.seed, 110));
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const Dataset data = random_dataset(rng, 50 + rng.uniform_int(200), 2 + rng.uniform_int(4));
            const Tree tree = random_tree(rng, data);
            const Dataset test = random_dataset(rng, 40 + rng.uniform_int(100), data.dim);
            const PiWeights pi = estimate_pi(tree, test);
            const SignalSpec signal = SignalSpec::explicit_values(test_mean_values(tree, test));
            for (int v = 0; v < tree.dim; ++v) {
                const int vars[1] = {v};
                const double exact = delta_exact(tree, vars, test).delta;
                const double formula = delta_formula(tree, v, signal, pi).delta;
                worst = std::max(worst, rel_residual(exact, formula));
            }
        }
        rec.add("formula-vs-exact", worst < 1e-10, worst,
                "VIMP formula with test-mean signal reproduces the exact noised MSE difference");
    }

    // -- limit signs, pair decomposition ----------------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 111));
        bool ok = true;
        double worst = 0.0;
        for (int t = 0; t < trials && ok; ++t) {
            const Dataset data = random_dataset(rng, 50 + rng.uniform_int(300), 2 + rng.uniform_int(5));
            const Tree tree = random_tree(rng, data);
            const PiWeights pi = estimate_pi(tree, uniform_sample(rng, 300, data.dim));
            const std::vector<double> fitted = tree.terminal_values();
            for (int v = 0; v < tree.dim && ok; ++v) {
                if (delta_limit(tree, v, fitted, pi).delta < 0.0) ok = false;
                for (int w = v + 1; w < tree.dim && ok; ++w) {
                    const double assoc = association_limit(tree, v, w, fitted, pi);
                    if (assoc > 0.0) ok = false;
                    const PairedSubtrees ps = paired_maximal_subtrees(tree, v, w);
                    if (ps.dropped_v.empty() && ps.dropped_w.empty() && assoc != 0.0) ok = false;
                    double kept = 0.0;
                    for (const auto* list : {&ps.kept_v, &ps.kept_w})
                        for (const MaximalSubtree& st : *list) kept += node_mse(st, fitted, pi);
                    const double lhs = kept + std::abs(assoc);
                    const double rhs = delta_limit(tree, v, fitted, pi).delta +
                                       delta_limit(tree, w, fitted, pi).delta;
                    worst = std::max(worst, rel_residual(lhs, rhs));
                }
            }
        }
        ok = ok && worst < 1e-10;
        rec.add("pair-sign-and-decomposition", ok, worst,
                "association limit <= 0, zero without nesting; kept + |assoc| = sum of single limits");
    }

    // -- Jensen bound --------------------------------------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 112));
        bool ok = true;
        double worst = 0.0;
        for (int t = 0; t < std::max(1, trials / 2) && ok; ++t) {
            const Dataset data = random_dataset(rng, 60 + rng.uniform_int(120), 3);
            ForestConfig fc;
            fc.num_trees = 1 + static_cast<int>(rng.uniform_int(8));
            fc.mtry = 2;
            fc.bootstrap = false;
            fc.min_node_size = 5;
            fc.seed = rng.next_u64();
            const Forest forest = grow_forest(data, fc, options.threads);
            const Dataset sample = uniform_sample(rng, 200, data.dim);
            std::vector<std::vector<double>> values0;
            for (const Tree& tree : forest.trees) values0.push_back(tree.terminal_values());
            for (int v = 0; v < static_cast<int>(data.dim) && ok; ++v) {
                const ForestLimits lim = forest_limit_quantities(forest, values0, v, sample);
                if (lim.r_squared > lim.jensen_bound * (1.0 + 1e-12) + 1e-15) ok = false;
                if (fc.num_trees == 1)
                    worst = std::max(worst, rel_residual(lim.r_squared, lim.jensen_bound));
            }
            // duplicated tree: the variance term halves, so the bound is strict
            Forest twin;
            twin.config.num_trees = 2;
            twin.trees = {forest.trees[0], forest.trees[0]};
            twin.inbag.resize(2);
            const std::vector<std::vector<double>> tv = {values0[0], values0[0]};
            for (int v = 0; v < static_cast<int>(data.dim) && ok; ++v) {
                const ForestLimits lim = forest_limit_quantities(twin, tv, v, sample);
                bool reached_variance = false;   // some sample row in a spread-out region
                const PiWeights pi = estimate_pi(twin.trees[0], sample);
                for (const MaximalSubtree& st : maximal_subtrees(twin.trees[0], v)) {
                    if (subtree_moments(path_distribution(st, tv[0])).variance <= 1e-9) continue;
                    double mass = 0.0;
                    for (int m : st.terminals) mass += pi.at(m);
                    if (mass > 0.0) reached_variance = true;
                }
                if (reached_variance && !(lim.r_squared < lim.jensen_bound)) ok = false;
            }
        }
        ok = ok && worst < 1e-12;
        rec.add("jensen-bound", ok, worst,
                "r_squared <= bound on every forest; equality at B=1; strict for duplicated trees");
    }

    // -- disjoint-slice forest association identity -----------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 113));
        bool ok = true;
        double worst = 0.0;
        for (int t = 0; t < few; ++t) {
            Forest forest;
            forest.config.num_trees = 3;
            forest.config.bootstrap = false;
            forest.trees.push_back(build_sliced_tree(0.0, 1.0 / 3.0, rng));
            forest.trees.push_back(build_sliced_tree(1.0 / 3.0, 2.0 / 3.0, rng));
            forest.trees.push_back(build_sliced_tree(2.0 / 3.0, 1.0, rng));
            forest.inbag.resize(3);
            const Dataset sample = uniform_sample(rng, 600, 3);
            std::vector<std::vector<double>> values0;
            for (const Tree& tree : forest.trees) values0.push_back(tree.terminal_values());

            const double assoc = forest_association_limit(forest, values0, 2, 1, sample);
            double expected = 0.0;   // -(1/B^2) sum_b sum_dropped theta0
            for (std::size_t b = 0; b < 3; ++b) {
                const PiWeights pi = estimate_pi(forest.trees[b], sample);
                const PairedSubtrees ps = paired_maximal_subtrees(forest.trees[b], 2, 1);
                if (ps.dropped_v.size() != 1 || !ps.dropped_w.empty()) ok = false;
                for (const MaximalSubtree& st : ps.dropped_v)
                    expected -= node_mse(st, values0[b], pi) / 9.0;
            }
            worst = std::max(worst, rel_residual(assoc, expected));
            if (assoc > 0.0) ok = false;
        }
        ok = ok && worst < 1e-12;
        rec.add("sliced-forest-association", ok, worst,
                "forests with per-tree disjoint regions hit the overcount limit -(1/B^2)*sum theta0");
    }

    // -- Monte Carlo against exact VIMP ---------------------------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 114));
        bool ok = true;
        double worst = 0.0;
        const int replicates = 2000;
        for (int t = 0; t < std::min(trials, 20); ++t) {
            const Dataset data = random_dataset(rng, 60 + rng.uniform_int(100), 3);
            const Tree tree = random_tree(rng, data);
            const Dataset test = random_dataset(rng, 50, data.dim);
            const int v = static_cast<int>(rng.uniform_int(3));
            const int vars[1] = {v};
            const double exact = delta_exact(tree, vars, test).delta;
            const VimpResult mc = delta_mc(tree, vars, test, replicates, NoisingMode::FullRandom,
                                           rng, options.threads);
            const double band = 4.0 * mc.std_error.value_or(0.0) + 1e-12;
            worst = std::max(worst, std::abs(mc.delta - exact) - band);
            if (std::abs(mc.delta - exact) > band) ok = false;
        }
        rec.add("monte-carlo-vs-exact", ok, std::max(0.0, worst),
                "sampled noising converges to the exact conditional VIMP (4 std-error band)");
    }

    // -- forest linearity and step-function expressiveness ----------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 115));
        bool ok = true;
        for (int t = 0; t < few && ok; ++t) {
            const Dataset data = random_dataset(rng, 80, 3);
            ForestConfig fc;
            fc.num_trees = 5;
            fc.bootstrap = true;
            fc.seed = rng.next_u64();
            const Forest forest = grow_forest(data, fc, options.threads);
            for (int probe = 0; probe < 20 && ok; ++probe) {
                std::vector<double> x(3);
                for (double& c : x) c = rng.uniform();
                double sum = 0.0;
                for (const Tree& tree : forest.trees) sum += predict(tree, x);
                if (forest_predict(forest, x) != sum / 5.0) ok = false;
            }
        }
        // Step function on [0,1]^2 assembled from scaled indicator trees.
        const std::vector<std::vector<double>> cuts = {{0.3, 0.6}, {0.5, 0.5}, {0.8, 0.2}};
        const std::vector<double> coef = {2.0, -1.0, 0.5};
        Forest step;
        step.config.num_trees = 3;
        for (std::size_t j = 0; j < cuts.size(); ++j)
            step.trees.push_back(scale_terminal_values(rectangle_indicator_tree(cuts[j]),
                                                       3.0 * coef[j]));
        step.inbag.resize(3);
        double l2 = 0.0;
        for (int gi = 0; gi < 100; ++gi)
            for (int gj = 0; gj < 100; ++gj) {
                const std::vector<double> x = {(gi + 0.5) / 100.0, (gj + 0.5) / 100.0};
                double mu = 0.0;
                for (std::size_t j = 0; j < cuts.size(); ++j)
                    if (x[0] <= cuts[j][0] && x[1] <= cuts[j][1]) mu += coef[j];
                const double err = forest_predict(step, x) - mu;
                l2 += err * err;
            }
        l2 /= 10000.0;
        ok = ok && l2 <= 1e-20;
        rec.add("forest-linearity-and-expressiveness", ok, l2,
                "forest averages tree predictions exactly; indicator-tree forest matches a step function");
    }

    // -- out-of-bag coverage -------------------------------------------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 116));
        const Dataset data = random_dataset(rng, 100, 4);
        ForestConfig fc;
        fc.num_trees = 1000;
        fc.mtry = 2;
        fc.bootstrap = true;
        fc.seed = rng.next_u64();
        const Forest forest = grow_forest(data, fc, options.threads);
        const OobResult oob = oob_mse(forest, data);
        const bool ok = oob.skipped_rows == 0 && oob.mse > 0.0;
        rec.add("oob-coverage", ok, static_cast<double>(oob.skipped_rows),
                "every row is out of bag for some tree at B=1000, n=100");
    }

    // -- association bookkeeping ---------------------------------------------------------------------------
    {
        Rng rng(derive_stream(options.seed, 117));
        bool ok = true;
        for (int t = 0; t < few && ok; ++t) {
            const Dataset data = random_dataset(rng, 80, 3);
            const Tree tree = random_tree(rng, data);
            const Dataset test = random_dataset(rng, 50, 3);
            const AssociationResult res = association(tree, 0, 1, test, mse(tree, test));
            if (res.association != res.paired - res.additive) ok = false;
        }
        rec.add("association-bookkeeping", ok, 0.0,
                "association column equals paired minus additive exactly");
    }

    return results;
}

} // namespace treevimp
