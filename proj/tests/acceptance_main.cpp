// Acceptance gate: one scenario per contract item, one pass/fail line each.
// Exit status is the number of failed scenarios.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "treevimp/csv.hpp"
#include "treevimp/experiments.hpp"
#include "treevimp/forest.hpp"
#include "treevimp/noising.hpp"
#include "treevimp/rng.hpp"
#include "treevimp/subtree.hpp"
#include "treevimp/tree.hpp"
#include "treevimp/vimp.hpp"

using namespace treevimp;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

struct Scenario {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        if (ok) detail = why;   // keep the first reason
        ok = false;
    }
};

Dataset uniform_data(Rng& rng, std::size_t n, std::size_t d) {
    Dataset data;
    data.dim = d;
    for (std::size_t j = 0; j < d; ++j) data.column_names.push_back("x" + std::to_string(j + 1));
    data.response_name = "y";
    std::vector<double> coef(d);
    for (double& c : coef) c = 4.0 * rng.uniform() - 2.0;
    std::vector<double> xs(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& x : xs) x = rng.uniform();
        double y = 0.5 * rng.normal() + 3.0 * xs[0] * xs[d - 1];
        for (std::size_t j = 0; j < d; ++j) y += coef[j] * xs[j];
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

std::string format_g(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

// ---- 1. noised-value formula vs node-mse limit --------------------------------

Scenario formula_equals_limit() {
    Scenario s;
    Rng rng(9001);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 2 + rng.uniform_int(7);     // 2..8
        const std::size_t n = 50 + rng.uniform_int(451);  // 50..500
        const Dataset data = uniform_data(rng, n, d);
        const Tree tree = random_tree(rng, data);
        const PiWeights pi = estimate_pi(tree, data);
        const std::vector<double> fitted = tree.terminal_values();
        for (int v = 0; v < static_cast<int>(d); ++v) {
            const double formula = delta_formula(tree, v, SignalSpec::fitted(), pi).delta;
            const double limit = delta_limit(tree, v, fitted, pi).delta;
            worst = std::max(worst, std::abs(formula - limit) / (1.0 + std::abs(limit)));
        }
    }
    if (worst >= 1e-10) s.fail("worst residual " + format_g(worst));
    if (s.ok) s.detail = "100 trees, worst residual " + format_g(worst);
    return s;
}

// ---- 2. sampled noising vs closed form ----------------------------------------

Scenario sampling_matches_closed_form() {
    Scenario s;
    Rng rng(9002);
    const int draws = 100000;
    const double band = 4.0 / std::sqrt(static_cast<double>(draws));
    double worst_freq = 0.0, worst_sigmas = 0.0;
    int done = 0;
    while (done < 50) {
        const Dataset data = uniform_data(rng, 100 + rng.uniform_int(200), 3);
        const Tree tree = random_tree(rng, data);
        const int v = static_cast<int>(rng.uniform_int(3));
        const std::vector<int> vars = {v};
        const NoisedPredictor np = build_noised_predictor(tree, vars);
        if (np.regions.empty()) continue;

        // an x that lands in a randomized region
        std::vector<double> x;
        for (std::size_t i = 0; i < data.num_rows; ++i)
            if (np.in_region(node_membership(tree, {data.row(i), data.dim}))) {
                x.assign(data.row(i), data.row(i) + data.dim);
                break;
            }
        if (x.empty()) continue;
        ++done;

        const NoisedPredictor::Region& region =
            np.regions[np.region_of_label[node_membership(tree, x) - 1]];
        std::vector<long> counts(static_cast<std::size_t>(tree.num_terminals), 0);
        for (int i = 0; i < draws; ++i)
            ++counts[noised_membership_sample(tree, x, vars, NoisingMode::FullRandom, rng) - 1];
        long covered = 0;
        for (const PathDistribution::Atom& atom : region.pd.atoms) {
            const long c = counts[atom.terminal - 1];
            covered += c;
            worst_freq = std::max(
                worst_freq, std::abs(static_cast<double>(c) / draws - atom.mass));
        }
        if (covered != draws) s.fail("samples escaped the region");

        Rng mc_rng(derive_stream(9102, done));
        const VimpResult mc =
            delta_mc(tree, vars, data, 1000, NoisingMode::FullRandom, mc_rng);
        const VimpResult exact = delta_exact(tree, vars, data);
        const double se = std::max(*mc.std_error, 1e-12);
        worst_sigmas = std::max(worst_sigmas, std::abs(mc.delta - exact.delta) / se);
    }
    if (worst_freq >= band) s.fail("atom frequency off by " + format_g(worst_freq));
    if (worst_sigmas > 4.0) s.fail(format_g(worst_sigmas) + " std errors from exact");
    if (s.ok) s.detail = "50 triples, worst atom gap " + format_g(worst_freq) + " (band " +
               format_g(band) + "), worst mc gap " + format_g(worst_sigmas) + " se";
    return s;
}

// ---- 3. association sign and overcount decomposition --------------------------

Scenario association_sign_and_decomposition() {
    Scenario s;
    Rng rng(9003);
    double worst = 0.0;
    int nested_pairs = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 2 + rng.uniform_int(5);
        const Dataset data = uniform_data(rng, 60 + rng.uniform_int(240), d);
        const Tree tree = random_tree(rng, data);
        const PiWeights pi = estimate_pi(tree, data);
        const std::vector<double> fitted = tree.terminal_values();
        for (int v = 0; v < static_cast<int>(d); ++v) {
            for (int w = v + 1; w < static_cast<int>(d); ++w) {
                const double assoc = association_limit(tree, v, w, fitted, pi);
                if (assoc > 1e-12) s.fail("positive association " + format_g(assoc));

                const PairedSubtrees ps = paired_maximal_subtrees(tree, v, w);
                const bool no_drop = ps.dropped_v.empty() && ps.dropped_w.empty();
                if (no_drop && assoc != 0.0) s.fail("free pair with nonzero association");
                if (!no_drop) {
                    ++nested_pairs;
                    if (assoc >= 0.0) s.fail("nested pair without negative association");
                }

                double kept = 0.0;
                for (const MaximalSubtree& st : ps.kept_v) kept += node_mse(st, fitted, pi);
                for (const MaximalSubtree& st : ps.kept_w) kept += node_mse(st, fitted, pi);
                const double dv = delta_limit(tree, v, fitted, pi).delta;
                const double dw = delta_limit(tree, w, fitted, pi).delta;
                const double gap =
                    std::abs(kept - assoc - (dv + dw)) / (1.0 + std::abs(dv + dw));
                worst = std::max(worst, gap);
            }
        }
    }
    if (worst >= 1e-10) s.fail("decomposition residual " + format_g(worst));
    if (nested_pairs == 0) s.fail("no nested pair ever seen");
    if (s.ok) s.detail = "100 trees, " + std::to_string(nested_pairs) +
               " nested pairs, decomposition residual " + format_g(worst);
    return s;
}

// ---- 4. forest second-moment bound --------------------------------------------

Scenario forest_bound_holds() {
    Scenario s;
    Rng rng(9004);
    double worst_excess = -1e300;
    for (int t = 0; t < 50; ++t) {
        const std::size_t d = 3 + rng.uniform_int(3);
        const Dataset data = uniform_data(rng, 80 + rng.uniform_int(160), d);
        ForestConfig fc;
        fc.num_trees = 2 + static_cast<int>(rng.uniform_int(19));   // 2..20
        fc.mtry = 1 + static_cast<int>(rng.uniform_int(d));
        fc.bootstrap = false;
        fc.seed = rng.next_u64();
        const Forest forest = grow_forest(data, fc);
        std::vector<std::vector<double>> values0;
        for (const Tree& tree : forest.trees) values0.push_back(tree.terminal_values());
        for (int v = 0; v < static_cast<int>(d); ++v) {
            const ForestLimits fl = forest_limit_quantities(forest, values0, v, data);
            if (fl.r_squared > fl.jensen_bound * (1.0 + 1e-12) + 1e-15)
                s.fail("bound violated by " + format_g(fl.r_squared - fl.jensen_bound));
            worst_excess = std::max(worst_excess, fl.r_squared - fl.jensen_bound);
        }
    }

    double worst_eq = 0.0;
    for (int t = 0; t < 10; ++t) {
        const Dataset data = uniform_data(rng, 120, 3);
        ForestConfig fc;
        fc.num_trees = 1;
        fc.seed = rng.next_u64();
        const Forest forest = grow_forest(data, fc);
        const std::vector<std::vector<double>> values0 = {forest.trees[0].terminal_values()};
        for (int v = 0; v < 3; ++v) {
            const ForestLimits fl = forest_limit_quantities(forest, values0, v, data);
            worst_eq = std::max(worst_eq, std::abs(fl.r_squared - fl.jensen_bound) /
                                              (1.0 + std::abs(fl.jensen_bound)));
        }
    }
    if (worst_eq >= 1e-12) s.fail("single-tree equality off by " + format_g(worst_eq));
    if (s.ok) s.detail = "50 forests within bound (max excess " + format_g(worst_excess) +
               "), single-tree equality gap " + format_g(worst_eq);
    return s;
}

// ---- 5. rectangle indicator trees ----------------------------------------------

Scenario rectangle_trees_exact() {
    Scenario s;
    Rng rng(9005);
    for (const int d : {1, 2, 5, 10}) {
        std::vector<double> cuts(static_cast<std::size_t>(d));
        for (double& c : cuts) c = 0.2 + 0.6 * rng.uniform();
        const Tree tree = rectangle_indicator_tree(cuts);
        if (tree.num_terminals != d + 1) {
            s.fail("d=" + std::to_string(d) + " has " + std::to_string(tree.num_terminals) +
                   " terminals");
            continue;
        }
        int mismatches = 0;
        std::vector<double> x(static_cast<std::size_t>(d));
        for (int i = 0; i < 10000; ++i) {
            bool inside = true;
            for (int j = 0; j < d; ++j) {
                x[j] = rng.uniform();
                inside = inside && x[j] <= cuts[j];
            }
            if (predict(tree, x) != (inside ? 1.0 : 0.0)) ++mismatches;
        }
        if (mismatches != 0)
            s.fail("d=" + std::to_string(d) + ": " + std::to_string(mismatches) + " mismatches");
    }
    if (s.ok) s.detail = "d in {1,2,5,10}, 10000 points each, 0 mismatches";
    return s;
}

// ---- 6. simulated interaction ranking ------------------------------------------

Scenario simulation_ranking() {
    Scenario s;
    ProtocolConfig pc;
    pc.replicates = 100;
    pc.num_trees = 200;
    pc.mtry = 3;
    pc.seed = 1;
    SimulationConfig sc;
    sc.n = 100;
    sc.num_datasets = 20;
    const AssociationTable table = run_simulation(pc, sc);

    std::vector<AssociationTable::Row> rows = table.rows;
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.standardized < b.standardized; });
    if (rows.size() != 15) s.fail("expected 15 pairs");
    if (rows[0].label != "a:b") s.fail("most negative pair is " + rows[0].label);
    if (rows[1].label != "a:d") s.fail("second most negative pair is " + rows[1].label);
    if (s.ok) s.detail = "a:b " + format_g(rows[0].standardized) + ", a:d " +
               format_g(rows[1].standardized) + ", next " + rows[2].label + " " +
               format_g(rows[2].standardized);
    return s;
}

// ---- 7. air pollution ranking ---------------------------------------------------

Scenario airquality_ranking() {
    Scenario s;
    const LoadResult loaded = load_csv(std::string(TREEVIMP_DATA_DIR) + "/airquality.csv",
                                       "Ozone", MissingPolicy::DropRow);
    ProtocolConfig pc;
    pc.replicates = 100;
    pc.num_trees = 200;
    pc.mtry = 3;
    pc.seed = 1;
    const AssociationTable table = run_airquality(loaded.data, pc);

    std::vector<AssociationTable::Row> rows = table.rows;
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.standardized > b.standardized; });
    const auto is_pair = [](const AssociationTable::Row& r, const std::string& a,
                            const std::string& b) {
        return r.label == a + ":" + b || r.label == b + ":" + a;
    };
    if (!is_pair(rows[0], "Temp", "Wind") || rows[0].standardized <= 0.0)
        s.fail("largest pair is " + rows[0].label);
    if (!is_pair(rows[1], "Temp", "Solar.R") || rows[1].standardized <= 0.0)
        s.fail("second pair is " + rows[1].label);
    double month_day = 1e300;
    for (const auto& r : table.rows)
        if (is_pair(r, "Month", "Day")) month_day = r.standardized;
    if (std::abs(month_day) > 0.5) s.fail("Month:Day standardized " + format_g(month_day));
    if (s.ok) s.detail = rows[0].label + " " + format_g(rows[0].standardized) + ", " + rows[1].label +
               " " + format_g(rows[1].standardized) + ", Month:Day " + format_g(month_day);
    return s;
}

// ---- 8. byte-identical command line runs ----------------------------------------

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

Scenario cli_reproducibility() {
    Scenario s;
    const char* cli_env = std::getenv("TREEVIMP_CLI");
    const std::string cli = cli_env ? cli_env : "./treevimp";
    const fs::path dir = fs::path("acceptance_cli_scratch");
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string data = std::string(TREEVIMP_DATA_DIR) + "/airquality.csv";

    // {name, command with OUT/THREADS placeholders, capture-stdout?}
    struct Cmd {
        std::string name;
        std::string args;
        bool to_stdout;
    };
    const fs::path model = dir / "model.json";
    const std::vector<Cmd> cmds = {
        {"grow",
         "grow --data " + data + " --response Ozone --ntree 12 --mtry 2 --bootstrap --seed 5",
         false},
        {"vimp",
         "vimp --model " + model.string() + " --test " + data +
             " --response Ozone --vars Temp,Wind --mode lr-random --replicates 30 --seed 9",
         true},
        {"pairs",
         "pairs --model " + model.string() + " --test " + data +
             " --response Ozone --mode lr-splits --replicates 10 --seed 4",
         false},
        {"airquality", "airquality --replicates 2 --ntree 10 --seed 3", false},
        {"simulate", "simulate --n 60 --datasets 2 --replicates 2 --ntree 10 --seed 3", false},
        {"check", "check --trials 3 --seed 2", true},
    };

    for (const Cmd& cmd : cmds) {
        std::vector<std::string> outputs;
        int variant = 0;
        for (const int threads : {1, 8, 1, 8}) {
            const fs::path out =
                dir / (cmd.name + "_" + std::to_string(variant++) + ".out");
            std::string line = cli + " " + cmd.args + " --threads " + std::to_string(threads);
            if (cmd.to_stdout)
                line += " > " + out.string();
            else
                line += " --out " + out.string();
            if (cmd.name == "grow" && variant == 1) {
                // keep one model for the dependent commands
                std::string keep = cli + " " + cmd.args + " --threads 1 --out " + model.string();
                if (std::system(keep.c_str()) != 0) s.fail("grow for model failed");
            }
            if (std::system(line.c_str()) != 0) {
                s.fail(cmd.name + " exited nonzero");
                break;
            }
            outputs.push_back(slurp(out));
        }
        for (std::size_t i = 1; i < outputs.size(); ++i)
            if (outputs[i] != outputs[0])
                s.fail(cmd.name + " output differs between runs/threads");
        if (!outputs.empty() && outputs[0].empty()) s.fail(cmd.name + " produced no output");
    }
    if (s.ok) fs::remove_all(dir);
    if (s.ok) s.detail = "6 subcommands, 4 runs each (threads 1/8), byte-compared";
    return s;
}

// ---- 9. invariant suite -----------------------------------------------------------

Scenario invariant_suite() {
    Scenario s;
    TheoryCheckOptions opt;
    opt.seed = 1;
    opt.trials = 100;
    const std::vector<CheckResult> results = run_theory_checks(opt);
    int passed = 0;
    for (const CheckResult& r : results) {
        if (r.passed)
            ++passed;
        else
            s.fail(r.name + " failed (worst " + format_g(r.worst_residual) + ")");
    }
    if (s.ok) s.detail = std::to_string(passed) + "/" + std::to_string(results.size()) +
               " checks at 100 trials";
    return s;
}

struct Criterion {
    const char* name;
    Scenario (*run)();
    double time_limit;   // seconds, 0 = none
};

} // namespace

int main() {
    const Criterion criteria[] = {
        {"formula-vs-limit identity", formula_equals_limit, 10.0},
        {"sampling-vs-closed-form", sampling_matches_closed_form, 60.0},
        {"association sign and decomposition", association_sign_and_decomposition, 0.0},
        {"forest second-moment bound", forest_bound_holds, 0.0},
        {"rectangle indicator trees", rectangle_trees_exact, 0.0},
        {"simulated interaction ranking", simulation_ranking, 600.0},
        {"air pollution ranking", airquality_ranking, 300.0},
        {"command line reproducibility", cli_reproducibility, 0.0},
        {"invariant suite", invariant_suite, 0.0},
    };

    int failures = 0;
    int index = 0;
    for (const Criterion& c : criteria) {
        ++index;
        const double start = now_seconds();
        Scenario s = c.run();
        const double elapsed = now_seconds() - start;
        if (c.time_limit > 0.0 && elapsed > c.time_limit)
            s.fail("took " + format_g(elapsed) + "s, limit " + format_g(c.time_limit) + "s");
        std::printf("[%s] %d. %-36s %6.2fs  %s\n", s.ok ? "PASS" : "FAIL", index, c.name,
                    elapsed, s.detail.c_str());
        if (!s.ok) ++failures;
    }
    std::printf("%d/9 acceptance criteria passed\n", 9 - failures);
    return failures;
}
