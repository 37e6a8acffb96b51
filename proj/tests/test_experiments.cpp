#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "treevimp/csv.hpp"
#include "treevimp/experiments.hpp"
#include "treevimp/report.hpp"
#include "treevimp/rng.hpp"

using namespace treevimp;

namespace {

AssociationTable sample_table() {
    AssociationTable t;
    t.rows.push_back({"Temp:Wind", 0.706, 0.600, 0.106, 11.351});
    t.rows.push_back({"Month:Day", -0.0125, -0.01, -0.0025, -0.42});
    t.reference_mse = 0.9338;
    t.replicates = 1000;
    t.seed = 42;
    t.config = {{"num_trees", "1000"}, {"mtry", "3"}};
    return t;
}

const AssociationTable::Row* find_pair(const AssociationTable& t, const std::string& a,
                                       const std::string& b) {
    for (const auto& row : t.rows)
        if (row.label == a + ":" + b || row.label == b + ":" + a) return &row;
    return nullptr;
}

} // namespace

TEST_CASE("csv serialization is fixed to six decimals") {
    const std::string csv = table_to_csv(sample_table());
    CHECK(csv ==
          "pair,paired,additive,association,assoc_per_mse\n"
          "Temp:Wind,0.706000,0.600000,0.106000,11.351000\n"
          "Month:Day,-0.012500,-0.010000,-0.002500,-0.420000\n");

    AssociationTable empty;
    CHECK(table_to_csv(empty) == "pair,paired,additive,association,assoc_per_mse\n");
}

TEST_CASE("json roundtrip keeps every field") {
    const AssociationTable t = sample_table();
    const AssociationTable back = table_from_json(table_to_json(t));
    CHECK(back.reference_mse == t.reference_mse);
    CHECK(back.replicates == t.replicates);
    CHECK(back.seed == t.seed);
    CHECK(back.config == t.config);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0].label == "Temp:Wind");
    CHECK(back.rows[0].paired == t.rows[0].paired);
    CHECK(back.rows[0].standardized == t.rows[0].standardized);
    CHECK(back.rows[1].association == t.rows[1].association);
}

TEST_CASE("write_file creates and overwrites") {
    const std::string path = "write_file_probe.txt";
    write_file(path, "alpha\n");
    write_file(path, "beta\n");
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "beta");
    in.close();
    std::remove(path.c_str());
    CHECK_THROWS(write_file("no_such_dir/x.txt", "y"));
}

TEST_CASE("simulation datasets are reproducible and carry the signal") {
    const Dataset a = draw_simulation_dataset(500, false, 123);
    const Dataset b = draw_simulation_dataset(500, false, 123);
    const Dataset c = draw_simulation_dataset(500, false, 124);
    CHECK(a.covariates == b.covariates);
    CHECK(a.response == b.response);
    CHECK(a.covariates != c.covariates);

    CHECK(a.num_rows == 500);
    CHECK(a.dim == 6);
    CHECK(a.column_names == std::vector<std::string>{"a", "b", "c", "d", "e", "f"});
    CHECK(a.response_name == "y");

    // signal check: y should roughly match the formula at each row
    double worst = 0.0;
    for (std::size_t i = 0; i < a.num_rows; ++i) {
        const double mu = 30.0 * std::sin(3.14159265358979323846 * a.x(i, 0) * a.x(i, 1)) +
                          20.0 * (a.x(i, 2) - 0.5) * (a.x(i, 2) - 0.5) +
                          20.0 * a.x(i, 0) * a.x(i, 3) + 5.0 * a.x(i, 4);
        worst = std::max(worst, std::abs(a.y(i) - mu));
    }
    CHECK(worst < 6.0);   // gaussian noise, sd 1

    const Dataset d = draw_simulation_dataset(500, true, 123);
    double scale = 0.0;
    for (std::size_t i = 0; i < d.num_rows; ++i) scale = std::max(scale, std::abs(d.y(i)));
    CHECK(scale < 6.0);   // response is noise only
}

TEST_CASE("pair protocol table structure and bookkeeping") {
    const Dataset data = draw_simulation_dataset(80, false, 7);

    ProtocolConfig pc;
    pc.replicates = 3;
    pc.num_trees = 15;
    pc.mtry = 2;
    pc.seed = 99;

    ReplicateDump dump;
    const AssociationTable t = run_pair_protocol(data, pc, PairOrder::ByIndex, &dump);

    REQUIRE(t.rows.size() == 15);   // 6 choose 2
    CHECK(t.rows.front().label == "a:b");
    CHECK(t.rows.back().label == "e:f");
    CHECK(t.replicates == 3);
    CHECK(t.reference_mse > 0.0);
    CHECK(t.seed == 99);
    CHECK(t.config.at("num_trees") == "15");

    for (const auto& row : t.rows) {
        CHECK(row.association == row.paired - row.additive);
        CHECK(row.standardized ==
              doctest::Approx(row.association / t.reference_mse * 100.0).epsilon(1e-12));
    }

    // dump: per replicate one entry per single and per pair, whose means
    // reproduce the table
    REQUIRE(dump.entries.size() == 3 * (6 + 15));
    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    for (const auto& e : dump.entries) {
        CHECK(e.dataset == 0);
        sums[e.label] += e.delta;
        ++counts[e.label];
    }
    for (const auto& row : t.rows) {
        REQUIRE(counts.count(row.label) == 1);
        CHECK(counts[row.label] == 3);
        CHECK(sums[row.label] / 3.0 == doctest::Approx(row.paired).epsilon(1e-10));
    }
    // additive column equals the mean single sums of the two variables
    const auto& ab = t.rows.front();
    CHECK(ab.additive ==
          doctest::Approx(sums["a"] / 3.0 + sums["b"] / 3.0).epsilon(1e-10));

    const std::string csv = dump.to_csv();
    CHECK(csv.rfind("dataset,replicate,label,delta\n", 0) == 0);

    // identical settings reproduce identical tables
    const AssociationTable t2 = run_pair_protocol(data, pc, PairOrder::ByIndex);
    CHECK(table_to_csv(t2) == table_to_csv(t));

    // importance ordering is a permutation of the same pairs
    const AssociationTable imp = run_pair_protocol(data, pc, PairOrder::ByImportance);
    std::set<std::string> canon;
    for (const auto& row : t.rows) canon.insert(row.label);
    int found = 0;
    for (const auto& row : imp.rows) {
        std::string l = row.label;
        const auto colon = l.find(':');
        const std::string x = l.substr(0, colon), y = l.substr(colon + 1);
        if (canon.count(x + ":" + y) || canon.count(y + ":" + x)) ++found;
    }
    CHECK(found == 15);
}

TEST_CASE("protocol rejects bad settings") {
    const Dataset data = draw_simulation_dataset(40, false, 1);
    ProtocolConfig pc;
    pc.replicates = 0;
    CHECK_THROWS(run_pair_protocol(data, pc, PairOrder::ByIndex));
    pc.replicates = 2;
    pc.train_fraction = 1.5;
    CHECK_THROWS(run_pair_protocol(data, pc, PairOrder::ByIndex));
}

TEST_CASE("air pollution study on the bundled fixture") {
    const LoadResult r = load_csv(std::string(TREEVIMP_DATA_DIR) + "/airquality.csv", "Ozone",
                                  MissingPolicy::DropRow);
    ProtocolConfig pc;
    pc.replicates = 4;
    pc.num_trees = 25;
    pc.seed = 5;
    const AssociationTable t = run_airquality(r.data, pc);

    REQUIRE(t.rows.size() == 10);   // 5 choose 2
    CHECK(t.config.at("response") == "Ozone^(1/3)");
    CHECK(t.config.at("missing") == "complete-case");
    CHECK(t.config.at("permutations") == "independent");
    CHECK(t.reference_mse > 0.0);
    CHECK(t.reference_mse < 2.0);   // cube-root scale
    for (const auto& row : t.rows) CHECK(row.association == row.paired - row.additive);

    // every pair of the five covariates appears exactly once
    int seen = 0;
    const std::vector<std::string> names = {"Solar.R", "Wind", "Temp", "Month", "Day"};
    for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t j = i + 1; j < names.size(); ++j)
            if (find_pair(t, names[i], names[j])) ++seen;
    CHECK(seen == 10);
}

TEST_CASE("simulation study averages across datasets") {
    ProtocolConfig pc;
    pc.replicates = 2;
    pc.num_trees = 10;
    pc.mtry = 2;
    pc.seed = 17;
    SimulationConfig sc;
    sc.n = 60;
    sc.num_datasets = 3;

    ReplicateDump dump;
    const AssociationTable t = run_simulation(pc, sc, &dump);
    REQUIRE(t.rows.size() == 15);
    CHECK(t.config.at("datasets") == "3");
    for (const auto& row : t.rows) {
        CHECK(row.association == row.paired - row.additive);
        CHECK(row.standardized ==
              doctest::Approx(row.association / t.reference_mse * 100.0).epsilon(1e-12));
    }

    // dump covers every dataset
    std::set<int> datasets;
    for (const auto& e : dump.entries) datasets.insert(e.dataset);
    CHECK(datasets == std::set<int>{0, 1, 2});
    CHECK(dump.entries.size() == 3 * 2 * (6 + 15));

    // dataset-level dump means average to the reported paired values
    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    for (const auto& e : dump.entries) {
        sums[e.label] += e.delta;
        ++counts[e.label];
    }
    for (const auto& row : t.rows)
        CHECK(sums[row.label] / counts[row.label] ==
              doctest::Approx(row.paired).epsilon(1e-10));
}

TEST_CASE("theory check suite passes and the negative control fails") {
    TheoryCheckOptions opt;
    opt.seed = 1;
    opt.trials = 2;
    const auto results = run_theory_checks(opt);
    CHECK(results.size() >= 15);
    for (const auto& r : results) CHECK(r.passed);

    TheoryCheckOptions bad = opt;
    bad.corrupt_theta0 = true;
    bool identity_failed = false;
    for (const auto& r : run_theory_checks(bad))
        if (!r.passed) identity_failed = true;
    CHECK(identity_failed);
}
