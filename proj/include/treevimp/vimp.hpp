#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "treevimp/dataset.hpp"
#include "treevimp/forest.hpp"
#include "treevimp/noising.hpp"
#include "treevimp/subtree.hpp"
#include "treevimp/tree.hpp"

namespace treevimp {

// Source of the reference terminal values a_{m,0}. Fitted uses the tree's
// own fitted values; Explicit supplies them per terminal label; TrueFunction
// averages an evaluable signal mu(x) over the given rows within each
// terminal (simulation studies).
struct SignalSpec {
    enum class Kind { Fitted, Explicit, TrueFunction };

    Kind kind = Kind::Fitted;
    std::vector<double> values;                                  // Explicit, label-1 indexed
    std::function<double(std::span<const double>)> mu;           // TrueFunction
    const Dataset* rows = nullptr;                               // TrueFunction

    static SignalSpec fitted() { return {}; }
    static SignalSpec explicit_values(std::vector<double> v) {
        SignalSpec s;
        s.kind = Kind::Explicit;
        s.values = std::move(v);
        return s;
    }
    static SignalSpec true_function(std::function<double(std::span<const double>)> f,
                                    const Dataset* sample) {
        SignalSpec s;
        s.kind = Kind::TrueFunction;
        s.mu = std::move(f);
        s.rows = sample;
        return s;
    }

    // Resolved a_{m,0} for every terminal of `tree`, index label-1.
    std::vector<double> terminal_values(const Tree& tree) const;
};

enum class VimpMethod { ExactConditional, MonteCarlo, ClosedForm, Limit, PermutationProxy };

struct VimpResult {
    double delta = 0.0;
    std::optional<double> std_error;   // MonteCarlo / PermutationProxy only
    VimpMethod method = VimpMethod::ExactConditional;
};

struct AssociationResult {
    double paired = 0.0;
    double additive = 0.0;
    double association = 0.0;      // paired - additive, exactly
    double standardized = 0.0;     // association / reference MSE * 100
};

// ---- prediction error -------------------------------------------------

double mse(const Tree& tree, const Dataset& test);
double mse(const Forest& forest, const Dataset& test);

// Exact expected L2 error of a noised predictor, integrating the path
// distributions analytically: mean over rows of (Y - mean_at(x))^2 + var_at(x).
double mse_noised(const NoisedPredictor& np, const Dataset& test);
double mse_noised(const ForestNoisedPredictor& fnp, const Forest& forest, const Dataset& test);

// ---- VIMP -------------------------------------------------------------

// Delta_vars conditional on the trained model and the given test sample:
// exact noised MSE minus base MSE.
VimpResult delta_exact(const Tree& tree, std::span<const int> vars, const Dataset& test);
VimpResult delta_exact(const Forest& forest, std::span<const int> vars, const Dataset& test);

// Monte Carlo estimate: each replicate samples one noised prediction per
// test row and records sampled MSE minus base MSE. Replicates use streams
// derived from one draw of `rng`, so results do not depend on thread count.
// `replicate_out`, when given, receives the per-replicate deltas in order.
VimpResult delta_mc(const Tree& tree, std::span<const int> vars, const Dataset& test,
                    int replicates, NoisingMode mode, Rng& rng, int threads = 0,
                    std::vector<double>* replicate_out = nullptr);
VimpResult delta_mc(const Forest& forest, std::span<const int> vars, const Dataset& test,
                    int replicates, NoisingMode mode, Rng& rng, int threads = 0,
                    std::vector<double>* replicate_out = nullptr);

// The conditional-on-L variable importance for one variable:
//   sum_k sum_{m in M_{k,v}} pi_m [ s2_k + (abar_k - a_m)(abar_k + a_m - 2 a_{m,0}) ]
// with (abar, s2) the path-distribution moments over the fitted values.
VimpResult delta_formula(const Tree& tree, int v, const SignalSpec& signal, const PiWeights& pi);

// Limit form: sum of node mean squared errors over the maximal v-subtrees.
VimpResult delta_limit(const Tree& tree, int v, std::span<const double> values0, const PiWeights& pi);

// ---- pairs ------------------------------------------------------------

AssociationResult association(const Tree& tree, int v, int w, const Dataset& test, double reference_mse);
AssociationResult association(const Forest& forest, int v, int w, const Dataset& test, double reference_mse);

// Limit of the association: minus the node mean squared errors of the
// overcounted (nested) subtrees; zero exactly when no nesting occurs.
double association_limit(const Tree& tree, int v, int w, std::span<const double> values0,
                         const PiWeights& pi);

// ---- forest limits ----------------------------------------------------

struct ForestLimits {
    double r_squared = 0.0;      // E over sample of E_coins[R_{F,0}(x)^2]
    double jensen_bound = 0.0;   // B^-1 sum_b sum_k theta_0(k, v, b)
};

// Both quantities use the empirical membership weights of `sample`, which
// makes r_squared <= jensen_bound an algebraic fact (equality at B = 1).
ForestLimits forest_limit_quantities(const Forest& forest,
                                     std::span<const std::vector<double>> values0_per_tree,
                                     int v, const Dataset& sample);

// E over sample of E_coins[R^2] for a one- or two-variable noising of the
// forest, with values0 in place of the fitted values.
double forest_r_squared(const Forest& forest,
                        std::span<const std::vector<double>> values0_per_tree,
                        std::span<const int> vars, const Dataset& sample);

// Limit of the forest association A_t: r^2 of the paired noising minus the
// two single-variable r^2 terms.
double forest_association_limit(const Forest& forest,
                                std::span<const std::vector<double>> values0_per_tree,
                                int v, int w, const Dataset& sample);

// ---- permutation proxy ------------------------------------------------

// Per replicate, independently permutes each variable in `vars` across the
// test rows (a fresh uniform permutation per variable) and records forest
// MSE on the permuted rows minus MSE on the originals.
VimpResult permutation_vimp(const Forest& forest, const Dataset& test, std::span<const int> vars,
                            int replicates, Rng& rng, int threads = 0,
                            std::vector<double>* replicate_out = nullptr);

} // namespace treevimp
