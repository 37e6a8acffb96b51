#include "doctest.h"

#include <set>
#include <vector>

#include "treevimp/noising.hpp"
#include "treevimp/rng.hpp"
#include "treevimp/subtree.hpp"
#include "treevimp/tree.hpp"

using namespace treevimp;

namespace {

Node internal(int var, double cut, int left, int right, int parent) {
    Node n;
    n.split_var = var;
    n.cut = cut;
    n.left = left;
    n.right = right;
    n.parent = parent;
    return n;
}

Node terminal(int label, double value, int parent) {
    Node n;
    n.label = label;
    n.value = value;
    n.count = 1;
    n.parent = parent;
    return n;
}

// x1 <= 0.5 -> 0; else x2 <= 0.5 -> 2, else 4.
Tree wedge_tree() {
    Tree t;
    t.nodes = {
        internal(0, 0.5, 1, 2, -1),
        terminal(1, 0.0, 0),
        internal(1, 0.5, 3, 4, 0),
        terminal(2, 2.0, 2),
        terminal(3, 4.0, 2),
    };
    t.root = 0;
    t.dim = 2;
    t.num_terminals = 3;
    t.validate();
    return t;
}

} // namespace

TEST_CASE("closed-form noised predictor for one variable") {
    const Tree t = wedge_tree();
    const std::vector<int> vars = {0};
    const NoisedPredictor np = build_noised_predictor(t, vars);

    REQUIRE(np.regions.size() == 1);
    CHECK(np.regions[0].subtree.root == 0);
    CHECK(np.regions[0].moments.mean == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(np.regions[0].moments.variance == doctest::Approx(2.75).epsilon(1e-15));
    for (int label = 1; label <= 3; ++label) CHECK(np.in_region(label));

    // every x randomizes, so the moments are position independent
    const double a[2] = {0.1, 0.9};
    const double b[2] = {0.9, 0.1};
    const Moments ma = noised_moments_at(np, a);
    const Moments mb = noised_moments_at(np, b);
    CHECK(ma.mean == mb.mean);
    CHECK(ma.variance == mb.variance);
    CHECK(ma.mean == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("noising the inner variable leaves the left branch deterministic") {
    const Tree t = wedge_tree();
    const std::vector<int> vars = {1};
    const NoisedPredictor np = build_noised_predictor(t, vars);

    REQUIRE(np.regions.size() == 1);
    CHECK(np.regions[0].subtree.root == 2);
    CHECK_FALSE(np.in_region(1));
    CHECK(np.in_region(2));
    CHECK(np.in_region(3));

    const double left[2] = {0.2, 0.7};
    const Moments ml = noised_moments_at(np, left);
    CHECK(ml.mean == 0.0);       // deterministic prediction
    CHECK(ml.variance == 0.0);

    const double right[2] = {0.8, 0.7};
    const Moments mr = noised_moments_at(np, right);
    CHECK(mr.mean == doctest::Approx(3.0).epsilon(1e-15));   // (2+4)/2
    CHECK(mr.variance == doctest::Approx(1.0).epsilon(1e-15));

    Rng rng(3);
    for (int i = 0; i < 64; ++i)
        CHECK(noised_membership_sample(t, left, vars, NoisingMode::FullRandom, rng) == 1);
}

TEST_CASE("full-random noising flips every node below the trigger") {
    // x1 root; the right child splits on x2. Noising x1 with x = (0.9, 0.1):
    // the trigger is the root, so the x2 node below flips too and value 4 is
    // reachable even though x2 = 0.1 would walk left.
    const Tree t = wedge_tree();
    const std::vector<int> vars = {0};
    const double x[2] = {0.9, 0.1};

    Rng rng(21);
    std::set<double> seen;
    for (int i = 0; i < 400; ++i)
        seen.insert(noised_predict_sample(t, x, vars, NoisingMode::FullRandom, rng));
    CHECK(seen.count(0.0) == 1);
    CHECK(seen.count(2.0) == 1);
    CHECK(seen.count(4.0) == 1);
}

TEST_CASE("splits-only noising keeps following x between the flips") {
    // same setup; only the root flips, the x2 node still routes by
    // x2 = 0.1 <= 0.5, so value 4 is unreachable.
    const Tree t = wedge_tree();
    const std::vector<int> vars = {0};
    const double x[2] = {0.9, 0.1};

    Rng rng(22);
    std::set<double> seen;
    for (int i = 0; i < 400; ++i)
        seen.insert(noised_predict_sample(t, x, vars, NoisingMode::SplitsOnly, rng));
    CHECK(seen.count(0.0) == 1);
    CHECK(seen.count(2.0) == 1);
    CHECK(seen.count(4.0) == 0);
}

TEST_CASE("pair noising uses the kept subtrees") {
    const Tree t = wedge_tree();
    const std::vector<int> pair = {0, 1};
    const NoisedPredictor np = build_noised_predictor(t, pair);

    // the x2 subtree is nested inside the x1 subtree, so one region remains
    REQUIRE(np.regions.size() == 1);
    CHECK(np.regions[0].subtree.root == 0);
    const double x[2] = {0.2, 0.2};
    CHECK(noised_moments_at(np, x).mean == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("sampled noising matches the closed form in distribution") {
    const Tree t = wedge_tree();
    const std::vector<int> vars = {0};
    const double x[2] = {0.3, 0.3};

    Rng rng(5);
    const int draws = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double v = noised_predict_sample(t, x, vars, NoisingMode::FullRandom, rng);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / draws;
    const double var = sumsq / draws - mean * mean;
    CHECK(mean == doctest::Approx(1.5).epsilon(0.02));
    CHECK(var == doctest::Approx(2.75).epsilon(0.05));
}

TEST_CASE("variables without splits never randomize") {
    Tree t = wedge_tree();
    t.dim = 3;   // pretend a third covariate exists but is never split on
    const std::vector<int> vars = {2};
    const NoisedPredictor np = build_noised_predictor(t, vars);
    CHECK(np.regions.empty());

    Rng rng(9);
    const double x[3] = {0.8, 0.2, 0.4};
    for (int i = 0; i < 32; ++i) {
        CHECK(noised_predict_sample(t, x, vars, NoisingMode::FullRandom, rng) == 2.0);
        CHECK(noised_membership_sample(t, x, vars, NoisingMode::SplitsOnly, rng) == 2);
    }
    CHECK(noised_moments_at(np, x).mean == 2.0);
    CHECK(noised_moments_at(np, x).variance == 0.0);
}

TEST_CASE("noising rejects malformed variable sets") {
    const Tree t = wedge_tree();
    Rng rng(1);
    const double x[2] = {0.5, 0.5};
    CHECK_THROWS(noised_predict_sample(t, x, std::vector<int>{}, NoisingMode::FullRandom, rng));
    CHECK_THROWS(noised_predict_sample(t, x, std::vector<int>{0, 0}, NoisingMode::FullRandom, rng));
    CHECK_THROWS(noised_predict_sample(t, x, std::vector<int>{5}, NoisingMode::FullRandom, rng));
    CHECK_THROWS(build_noised_predictor(t, std::vector<int>{0, 1, 1}));
}
