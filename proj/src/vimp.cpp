#include "treevimp/vimp.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace treevimp {

namespace {

std::span<const double> row_span(const Dataset& d, std::size_t i) {
    return {d.row(i), d.dim};
}

void check_test(const Dataset& test) {
    if (test.num_rows == 0) throw std::runtime_error("empty test data");
}

void set_threads(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

// Mean and standard error of the mean over replicate deltas.
VimpResult summarize(const std::vector<double>& deltas, VimpMethod method) {
    VimpResult out;
    out.method = method;
    const std::size_t r = deltas.size();
    double sum = 0.0;
    for (double d : deltas) sum += d;
    out.delta = sum / static_cast<double>(r);
    if (r >= 2) {
        double ss = 0.0;
        for (double d : deltas) ss += (d - out.delta) * (d - out.delta);
        out.std_error = std::sqrt(ss / static_cast<double>(r * (r - 1)));
    }
    return out;
}

// Per-tree table of the noised-minus-membership residual moments, indexed by
// terminal label - 1: mean(a_tilde) - values0[m] and var(a_tilde) inside a
// randomized region, zero outside.
struct RegionTable {
    std::vector<double> dmean;
    std::vector<double> dvar;
};

RegionTable build_region_table(const Tree& tree, std::span<const double> values0,
                               std::span<const int> vars) {
    if (static_cast<int>(values0.size()) != tree.num_terminals)
        throw std::runtime_error("reference values do not match terminal count");
    RegionTable table;
    table.dmean.assign(static_cast<std::size_t>(tree.num_terminals), 0.0);
    table.dvar.assign(static_cast<std::size_t>(tree.num_terminals), 0.0);

    std::vector<MaximalSubtree> subtrees;
    if (vars.size() == 1) {
        subtrees = maximal_subtrees(tree, vars[0]);
    } else if (vars.size() == 2) {
        PairedSubtrees paired = paired_maximal_subtrees(tree, vars[0], vars[1]);
        subtrees = std::move(paired.kept_v);
        for (MaximalSubtree& st : paired.kept_w) subtrees.push_back(std::move(st));
    } else {
        throw std::runtime_error("noising takes one or two variables");
    }

    for (const MaximalSubtree& st : subtrees) {
        const PathDistribution pd = path_distribution(st, values0);
        const Moments mom = subtree_moments(pd);
        for (int label : st.terminals) {
            table.dmean[static_cast<std::size_t>(label) - 1] = mom.mean - values0[static_cast<std::size_t>(label) - 1];
            table.dvar[static_cast<std::size_t>(label) - 1] = mom.variance;
        }
    }
    return table;
}

} // namespace

std::vector<double> SignalSpec::terminal_values(const Tree& tree) const {
    switch (kind) {
        case Kind::Fitted:
            return tree.terminal_values();
        case Kind::Explicit:
            if (static_cast<int>(values.size()) != tree.num_terminals)
                throw std::runtime_error("reference values do not match terminal count");
            return values;
        case Kind::TrueFunction: {
            if (!mu || rows == nullptr) throw std::runtime_error("signal function or sample missing");
            std::vector<double> sums(static_cast<std::size_t>(tree.num_terminals), 0.0);
            std::vector<std::size_t> counts(static_cast<std::size_t>(tree.num_terminals), 0);
            for (std::size_t i = 0; i < rows->num_rows; ++i) {
                const std::size_t m = static_cast<std::size_t>(node_membership(tree, row_span(*rows, i))) - 1;
                sums[m] += mu(row_span(*rows, i));
                ++counts[m];
            }
            std::vector<double> out = tree.terminal_values();   // fallback for unreached terminals
            for (std::size_t m = 0; m < out.size(); ++m)
                if (counts[m] > 0) out[m] = sums[m] / static_cast<double>(counts[m]);
            return out;
        }
    }
    throw std::runtime_error("invalid signal kind");
}

// ---- prediction error --------------------------------------------------

double mse(const Tree& tree, const Dataset& test) {
    check_test(test);
    double sum = 0.0;
    for (std::size_t i = 0; i < test.num_rows; ++i) {
        const double err = test.y(i) - predict(tree, row_span(test, i));
        sum += err * err;
    }
    return sum / static_cast<double>(test.num_rows);
}

double mse(const Forest& forest, const Dataset& test) {
    check_test(test);
    double sum = 0.0;
    for (std::size_t i = 0; i < test.num_rows; ++i) {
        const double err = test.y(i) - forest_predict(forest, row_span(test, i));
        sum += err * err;
    }
    return sum / static_cast<double>(test.num_rows);
}

double mse_noised(const NoisedPredictor& np, const Dataset& test) {
    check_test(test);
    double sum = 0.0;
    for (std::size_t i = 0; i < test.num_rows; ++i) {
        const Moments m = noised_moments_at(np, row_span(test, i));
        const double err = test.y(i) - m.mean;
        sum += err * err + m.variance;
    }
    return sum / static_cast<double>(test.num_rows);
}

double mse_noised(const ForestNoisedPredictor& fnp, const Forest& forest, const Dataset& test) {
    check_test(test);
    double sum = 0.0;
    for (std::size_t i = 0; i < test.num_rows; ++i) {
        const Moments m = forest_noised_moments(fnp, forest, row_span(test, i));
        const double err = test.y(i) - m.mean;
        sum += err * err + m.variance;
    }
    return sum / static_cast<double>(test.num_rows);
}

// ---- VIMP ----------------------------------------------------------------

VimpResult delta_exact(const Tree& tree, std::span<const int> vars, const Dataset& test) {
    const NoisedPredictor np = build_noised_predictor(tree, vars);
    return {mse_noised(np, test) - mse(tree, test), std::nullopt, VimpMethod::ExactConditional};
}

VimpResult delta_exact(const Forest& forest, std::span<const int> vars, const Dataset& test) {
    const ForestNoisedPredictor fnp = build_forest_noised_predictor(forest, vars);
    return {mse_noised(fnp, forest, test) - mse(forest, test), std::nullopt,
            VimpMethod::ExactConditional};
}

VimpResult delta_mc(const Tree& tree, std::span<const int> vars, const Dataset& test,
                    int replicates, NoisingMode mode, Rng& rng, int threads,
                    std::vector<double>* replicate_out) {
    check_test(test);
    if (replicates < 1) throw std::runtime_error("need at least one replicate");
    const double base = mse(tree, test);
    const std::uint64_t root_stream = rng.next_u64();
    std::vector<double> deltas(static_cast<std::size_t>(replicates));
    set_threads(threads);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < replicates; ++r) {
        Rng rep(derive_stream(root_stream, static_cast<std::uint64_t>(r)));
        double sum = 0.0;
        for (std::size_t i = 0; i < test.num_rows; ++i) {
            const double err = test.y(i) - noised_predict_sample(tree, row_span(test, i), vars, mode, rep);
            sum += err * err;
        }
        deltas[static_cast<std::size_t>(r)] = sum / static_cast<double>(test.num_rows) - base;
    }
    if (replicate_out) *replicate_out = deltas;
    return summarize(deltas, VimpMethod::MonteCarlo);
}

VimpResult delta_mc(const Forest& forest, std::span<const int> vars, const Dataset& test,
                    int replicates, NoisingMode mode, Rng& rng, int threads,
                    std::vector<double>* replicate_out) {
    check_test(test);
    if (replicates < 1) throw std::runtime_error("need at least one replicate");
    const double base = mse(forest, test);
    const std::uint64_t root_stream = rng.next_u64();
    std::vector<double> deltas(static_cast<std::size_t>(replicates));
    set_threads(threads);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < replicates; ++r) {
        Rng rep(derive_stream(root_stream, static_cast<std::uint64_t>(r)));
        double sum = 0.0;
        for (std::size_t i = 0; i < test.num_rows; ++i) {
            const double err =
                test.y(i) - forest_noised_predict(forest, row_span(test, i), vars, mode, rep);
            sum += err * err;
        }
        deltas[static_cast<std::size_t>(r)] = sum / static_cast<double>(test.num_rows) - base;
    }
    if (replicate_out) *replicate_out = deltas;
    return summarize(deltas, VimpMethod::MonteCarlo);
}

VimpResult delta_formula(const Tree& tree, int v, const SignalSpec& signal, const PiWeights& pi) {
    if (static_cast<int>(pi.weights.size()) != tree.num_terminals)
        throw std::runtime_error("membership weights do not match terminal count");
    const std::vector<double> fitted = tree.terminal_values();
    const std::vector<double> values0 = signal.terminal_values(tree);
    double delta = 0.0;
    for (const MaximalSubtree& st : maximal_subtrees(tree, v)) {
        const PathDistribution pd = path_distribution(st, fitted);
        const Moments mom = subtree_moments(pd);
        for (int label : st.terminals) {
            const std::size_t m = static_cast<std::size_t>(label) - 1;
            delta += pi.at(label) *
                     (mom.variance + (mom.mean - fitted[m]) * (mom.mean + fitted[m] - 2.0 * values0[m]));
        }
    }
    return {delta, std::nullopt, VimpMethod::ClosedForm};
}

VimpResult delta_limit(const Tree& tree, int v, std::span<const double> values0, const PiWeights& pi) {
    double delta = 0.0;
    for (const MaximalSubtree& st : maximal_subtrees(tree, v)) delta += node_mse(st, values0, pi);
    return {delta, std::nullopt, VimpMethod::Limit};
}

// ---- pairs ----------------------------------------------------------------

namespace {

template <typename Model>
AssociationResult association_impl(const Model& model, int v, int w, const Dataset& test,
                                   double reference_mse) {
    const int pair[2] = {v, w};
    const int single_v[1] = {v};
    const int single_w[1] = {w};
    AssociationResult out;
    out.paired = delta_exact(model, pair, test).delta;
    out.additive = delta_exact(model, single_v, test).delta + delta_exact(model, single_w, test).delta;
    out.association = out.paired - out.additive;
    out.standardized = reference_mse > 0.0 ? out.association / reference_mse * 100.0 : 0.0;
    return out;
}

} // namespace

AssociationResult association(const Tree& tree, int v, int w, const Dataset& test,
                              double reference_mse) {
    return association_impl(tree, v, w, test, reference_mse);
}

AssociationResult association(const Forest& forest, int v, int w, const Dataset& test,
                              double reference_mse) {
    return association_impl(forest, v, w, test, reference_mse);
}

double association_limit(const Tree& tree, int v, int w, std::span<const double> values0,
                         const PiWeights& pi) {
    const PairedSubtrees paired = paired_maximal_subtrees(tree, v, w);
    double overcount = 0.0;
    for (const MaximalSubtree& st : paired.dropped_v) overcount += node_mse(st, values0, pi);
    for (const MaximalSubtree& st : paired.dropped_w) overcount += node_mse(st, values0, pi);
    return -overcount;
}

// ---- forest limits ---------------------------------------------------------

double forest_r_squared(const Forest& forest,
                        std::span<const std::vector<double>> values0_per_tree,
                        std::span<const int> vars, const Dataset& sample) {
    check_test(sample);
    if (values0_per_tree.size() != forest.trees.size())
        throw std::runtime_error("reference values do not match forest size");
    const std::size_t b_count = forest.trees.size();
    std::vector<RegionTable> tables;
    tables.reserve(b_count);
    for (std::size_t b = 0; b < b_count; ++b)
        tables.push_back(build_region_table(forest.trees[b], values0_per_tree[b], vars));

    const double b_real = static_cast<double>(b_count);
    double total = 0.0;
    for (std::size_t i = 0; i < sample.num_rows; ++i) {
        double mean_sum = 0.0;
        double var_sum = 0.0;
        for (std::size_t b = 0; b < b_count; ++b) {
            const std::size_t m =
                static_cast<std::size_t>(node_membership(forest.trees[b], row_span(sample, i))) - 1;
            mean_sum += tables[b].dmean[m];
            var_sum += tables[b].dvar[m];
        }
        total += var_sum / (b_real * b_real) + (mean_sum / b_real) * (mean_sum / b_real);
    }
    return total / static_cast<double>(sample.num_rows);
}

ForestLimits forest_limit_quantities(const Forest& forest,
                                     std::span<const std::vector<double>> values0_per_tree,
                                     int v, const Dataset& sample) {
    if (values0_per_tree.size() != forest.trees.size())
        throw std::runtime_error("reference values do not match forest size");
    ForestLimits out;
    const int single[1] = {v};
    out.r_squared = forest_r_squared(forest, values0_per_tree, single, sample);
    double bound = 0.0;
    for (std::size_t b = 0; b < forest.trees.size(); ++b) {
        const PiWeights pi = estimate_pi(forest.trees[b], sample);
        for (const MaximalSubtree& st : maximal_subtrees(forest.trees[b], v))
            bound += node_mse(st, values0_per_tree[b], pi);
    }
    out.jensen_bound = bound / static_cast<double>(forest.trees.size());
    return out;
}

double forest_association_limit(const Forest& forest,
                                std::span<const std::vector<double>> values0_per_tree,
                                int v, int w, const Dataset& sample) {
    const int pair[2] = {v, w};
    const int single_v[1] = {v};
    const int single_w[1] = {w};
    return forest_r_squared(forest, values0_per_tree, pair, sample) -
           forest_r_squared(forest, values0_per_tree, single_v, sample) -
           forest_r_squared(forest, values0_per_tree, single_w, sample);
}

// ---- permutation proxy -----------------------------------------------------

VimpResult permutation_vimp(const Forest& forest, const Dataset& test, std::span<const int> vars,
                            int replicates, Rng& rng, int threads,
                            std::vector<double>* replicate_out) {
    if (test.num_rows < 2) throw std::runtime_error("permutation needs at least two test rows");
    if (replicates < 1) throw std::runtime_error("need at least one replicate");
    for (int v : vars)
        if (v < 0 || v >= static_cast<int>(test.dim))
            throw std::runtime_error("variable index out of range");
    const double base = mse(forest, test);
    const std::uint64_t root_stream = rng.next_u64();
    std::vector<double> deltas(static_cast<std::size_t>(replicates));
    set_threads(threads);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < replicates; ++r) {
        Rng rep(derive_stream(root_stream, static_cast<std::uint64_t>(r)));
        Dataset permuted = test;
        for (int v : vars) {
            const std::vector<std::size_t> perm = rep.permutation(test.num_rows);
            for (std::size_t i = 0; i < test.num_rows; ++i)
                permuted.x(i, static_cast<std::size_t>(v)) = test.x(perm[i], static_cast<std::size_t>(v));
        }
        deltas[static_cast<std::size_t>(r)] = mse(forest, permuted) - base;
    }
    if (replicate_out) *replicate_out = deltas;
    return summarize(deltas, VimpMethod::PermutationProxy);
}

} // namespace treevimp
