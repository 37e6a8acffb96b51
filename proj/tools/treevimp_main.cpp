// treevimp: regression trees, tree ensembles, and left-right-noising
// variable importance, with the replicated permutation experiments and the
// theory-check suite.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "treevimp/csv.hpp"
#include "treevimp/experiments.hpp"
#include "treevimp/forest.hpp"
#include "treevimp/report.hpp"
#include "treevimp/vimp.hpp"

#ifndef TREEVIMP_DEFAULT_DATA_DIR
#define TREEVIMP_DEFAULT_DATA_DIR "data"
#endif

namespace {

using namespace treevimp;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheckFailed = 3;

void apply_threads(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Model files hold either a forest or a bare tree; trees are wrapped as a
// one-tree forest so every downstream path is uniform.
Forest load_model(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return forest_from_json(text);
    } catch (const std::exception&) {
        Forest forest;
        forest.trees.push_back(tree_from_json(text));
        forest.config.num_trees = 1;
        forest.inbag.resize(1);
        return forest;
    }
}

int resolve_var(const std::string& token, const Dataset& data) {
    bool digits = !token.empty();
    for (char c : token) digits = digits && std::isdigit(static_cast<unsigned char>(c));
    if (digits) {
        const int v = std::stoi(token);
        if (v < 0 || v >= static_cast<int>(data.dim))
            throw std::runtime_error("variable index " + token + " out of range");
        return v;
    }
    for (std::size_t j = 0; j < data.column_names.size(); ++j)
        if (data.column_names[j] == token) return static_cast<int>(j);
    throw std::runtime_error("unknown variable '" + token + "'");
}

std::vector<int> parse_vars(const std::string& spec, const Dataset& data) {
    std::vector<int> vars;
    std::stringstream ss(spec);
    std::string token;
    while (std::getline(ss, token, ',')) vars.push_back(resolve_var(token, data));
    if (vars.empty() || vars.size() > 2)
        throw std::runtime_error("--vars takes one or two comma-separated variables");
    return vars;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_table(const AssociationTable& table, const std::string& out_path) {
    write_file(out_path, ends_with(out_path, ".json") ? table_to_json(table) : table_to_csv(table));
}

struct GrowArgs {
    std::string data_path, response, out_path;
    int ntree = 1, mtry = 0, min_node = 5;
    bool bootstrap = false;
    std::uint64_t seed = 0;
    int threads = 0;
};

int run_grow(const GrowArgs& args) {
    const Dataset data = load_csv(args.data_path, args.response).data;
    ForestConfig fc;
    fc.num_trees = args.ntree;
    fc.mtry = args.mtry;
    fc.bootstrap = args.bootstrap;
    fc.min_node_size = args.min_node;
    fc.seed = args.seed;
    const Forest forest = grow_forest(data, fc, args.threads);
    write_file(args.out_path, forest_to_json(forest));
    return kExitOk;
}

struct VimpArgs {
    std::string model_path, test_path, response, vars_spec, mode = "lr-random";
    int replicates = 1000;
    std::uint64_t seed = 0;
    int threads = 0;
};

VimpResult measure(const Forest& forest, const Dataset& test, const std::vector<int>& vars,
                   const std::string& mode, int replicates, Rng& rng, int threads) {
    if (mode == "permute") return permutation_vimp(forest, test, vars, replicates, rng, threads);
    const NoisingMode noising = mode == "lr-splits" ? NoisingMode::SplitsOnly : NoisingMode::FullRandom;
    return delta_mc(forest, vars, test, replicates, noising, rng, threads);
}

int run_vimp(const VimpArgs& args) {
    if (args.mode != "lr-random" && args.mode != "lr-splits" && args.mode != "permute")
        throw CLI::ValidationError("--mode", "expected lr-random, lr-splits or permute");
    const Forest forest = load_model(args.model_path);
    const Dataset test = load_csv(args.test_path, args.response).data;
    const std::vector<int> vars = parse_vars(args.vars_spec, test);
    Rng rng(args.seed);
    const VimpResult res = measure(forest, test, vars, args.mode, args.replicates, rng, args.threads);
    std::printf("vars %s\nmode %s\nreplicates %d\ndelta %.12g\n", args.vars_spec.c_str(),
                args.mode.c_str(), args.replicates, res.delta);
    if (res.std_error)
        std::printf("std_error %.12g\n", *res.std_error);
    else
        std::printf("std_error n/a\n");
    return kExitOk;
}

struct PairsArgs {
    std::string model_path, test_path, response, mode = "permute", out_path;
    int replicates = 1000;
    std::uint64_t seed = 0;
    int threads = 0;
};

int run_pairs(const PairsArgs& args) {
    if (args.mode != "lr-random" && args.mode != "lr-splits" && args.mode != "permute")
        throw CLI::ValidationError("--mode", "expected lr-random, lr-splits or permute");
    const Forest forest = load_model(args.model_path);
    const Dataset test = load_csv(args.test_path, args.response).data;
    const std::size_t d = test.dim;
    if (d < 2) throw std::runtime_error("pair report needs at least two variables");

    Rng rng(args.seed);
    AssociationTable table;
    table.reference_mse = mse(forest, test);
    table.replicates = args.replicates;
    table.seed = args.seed;
    table.config = {{"model", args.model_path}, {"mode", args.mode}};

    std::vector<double> single(d);
    for (std::size_t v = 0; v < d; ++v)
        single[v] = measure(forest, test, {static_cast<int>(v)}, args.mode, args.replicates, rng,
                            args.threads)
                        .delta;
    for (std::size_t v = 0; v < d; ++v)
        for (std::size_t w = v + 1; w < d; ++w) {
            AssociationTable::Row row;
            row.label = test.column_names[v] + ":" + test.column_names[w];
            row.paired = measure(forest, test, {static_cast<int>(v), static_cast<int>(w)},
                                 args.mode, args.replicates, rng, args.threads)
                             .delta;
            row.additive = single[v] + single[w];
            row.association = row.paired - row.additive;
            row.standardized =
                table.reference_mse > 0.0 ? row.association / table.reference_mse * 100.0 : 0.0;
            table.rows.push_back(std::move(row));
        }
    if (args.out_path.empty())
        std::fputs(table_to_csv(table).c_str(), stdout);
    else
        write_table(table, args.out_path);
    return kExitOk;
}

void emit_protocol_output(const AssociationTable& table, const std::string& out_path,
                          const ReplicateDump* dump, const std::string& dump_path) {
    if (out_path.empty())
        std::fputs(table_to_csv(table).c_str(), stdout);
    else
        write_table(table, out_path);
    if (dump && !dump_path.empty()) write_file(dump_path, dump->to_csv());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"regression-tree variable importance and paired associations"};
    app.require_subcommand(1);

    GrowArgs grow_args;
    CLI::App* grow = app.add_subcommand("grow", "grow a forest from a CSV and store it as JSON");
    grow->add_option("--data", grow_args.data_path, "training CSV")->required();
    grow->add_option("--response", grow_args.response, "response column name")->required();
    grow->add_option("--ntree", grow_args.ntree, "number of trees")->check(CLI::PositiveNumber);
    grow->add_option("--mtry", grow_args.mtry, "candidate variables per split (0 = all)");
    grow->add_option("--min-node", grow_args.min_node, "minimum rows per terminal");
    grow->add_flag("--bootstrap", grow_args.bootstrap, "bootstrap each tree's training rows");
    grow->add_option("--seed", grow_args.seed, "rng seed");
    grow->add_option("--threads", grow_args.threads, "OpenMP threads (0 = default)");
    grow->add_option("--out", grow_args.out_path, "output model path")->required();

    VimpArgs vimp_args;
    CLI::App* vimp = app.add_subcommand("vimp", "variable importance of one or two variables");
    vimp->add_option("--model", vimp_args.model_path, "model JSON from grow")->required();
    vimp->add_option("--test", vimp_args.test_path, "test CSV")->required();
    vimp->add_option("--response", vimp_args.response, "response column name")->required();
    vimp->add_option("--vars", vimp_args.vars_spec, "variable (or pair V,W), by name or index")
        ->required();
    vimp->add_option("--mode", vimp_args.mode, "lr-random | lr-splits | permute");
    vimp->add_option("--replicates", vimp_args.replicates, "noising replicates")
        ->check(CLI::PositiveNumber);
    vimp->add_option("--seed", vimp_args.seed, "rng seed");
    vimp->add_option("--threads", vimp_args.threads, "OpenMP threads (0 = default)");

    PairsArgs pairs_args;
    CLI::App* pairs = app.add_subcommand("pairs", "association report over every variable pair");
    pairs->add_option("--model", pairs_args.model_path, "model JSON from grow")->required();
    pairs->add_option("--test", pairs_args.test_path, "test CSV")->required();
    pairs->add_option("--response", pairs_args.response, "response column name")->required();
    pairs->add_option("--mode", pairs_args.mode, "lr-random | lr-splits | permute");
    pairs->add_option("--replicates", pairs_args.replicates, "replicates per measurement")
        ->check(CLI::PositiveNumber);
    pairs->add_option("--seed", pairs_args.seed, "rng seed");
    pairs->add_option("--threads", pairs_args.threads, "OpenMP threads (0 = default)");
    pairs->add_option("--out", pairs_args.out_path, "report path (.csv or .json; default stdout)");

    ProtocolConfig air_config;
    std::string air_data = std::string(TREEVIMP_DEFAULT_DATA_DIR) + "/airquality.csv";
    std::string air_out, air_dump;
    bool air_fast = false;
    CLI::App* air = app.add_subcommand("airquality", "replicated pair study on the air pollution data");
    air->add_option("--data", air_data, "airquality CSV path");
    CLI::Option* air_rep = air->add_option("--replicates", air_config.replicates, "protocol replicates");
    CLI::Option* air_ntree = air->add_option("--ntree", air_config.num_trees, "trees per forest");
    air->add_option("--mtry", air_config.mtry, "candidate variables per split");
    air->add_option("--seed", air_config.seed, "rng seed");
    air->add_option("--threads", air_config.threads, "OpenMP threads (0 = default)");
    air->add_flag("--fast", air_fast, "reduced scale: 100 replicates, 200 trees");
    air->add_option("--out", air_out, "report path (.csv or .json; default stdout)");
    air->add_option("--dump-replicates", air_dump, "write per-replicate deltas to this CSV");

    ProtocolConfig sim_config;
    SimulationConfig sim_settings;
    std::string sim_out, sim_dump;
    bool sim_fast = false;
    CLI::App* sim = app.add_subcommand("simulate", "replicated pair study on simulated data");
    CLI::Option* sim_n = sim->add_option("--n", sim_settings.n, "rows per dataset");
    CLI::Option* sim_ds = sim->add_option("--datasets", sim_settings.num_datasets, "independent datasets");
    CLI::Option* sim_rep = sim->add_option("--replicates", sim_config.replicates, "protocol replicates");
    CLI::Option* sim_ntree = sim->add_option("--ntree", sim_config.num_trees, "trees per forest");
    sim->add_option("--mtry", sim_config.mtry, "candidate variables per split");
    sim->add_option("--seed", sim_config.seed, "rng seed");
    sim->add_option("--threads", sim_config.threads, "OpenMP threads (0 = default)");
    sim->add_flag("--fast", sim_fast, "reduced scale: 20 datasets, 200 trees, 100 replicates");
    sim->add_flag("--pure-noise", sim_settings.pure_noise, "zero every signal coefficient");
    sim->add_option("--out", sim_out, "report path (.csv or .json; default stdout)");
    sim->add_option("--dump-replicates", sim_dump, "write per-replicate deltas to this CSV");

    TheoryCheckOptions check_options;
    CLI::App* check = app.add_subcommand("check", "run the theory and invariant suites");
    check->add_option("--trials", check_options.trials, "random instances per suite")
        ->check(CLI::PositiveNumber);
    check->add_option("--seed", check_options.seed, "rng seed");
    check->add_option("--threads", check_options.threads, "OpenMP threads (0 = default)");
    check->add_flag("--corrupt-theta0", check_options.corrupt_theta0,
                    "negative control: break the identity on purpose")
        ->group("");   // hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (grow->parsed()) {
            apply_threads(grow_args.threads);
            return run_grow(grow_args);
        }
        if (vimp->parsed()) {
            apply_threads(vimp_args.threads);
            return run_vimp(vimp_args);
        }
        if (pairs->parsed()) {
            apply_threads(pairs_args.threads);
            return run_pairs(pairs_args);
        }
        if (air->parsed()) {
            apply_threads(air_config.threads);
            if (air_fast) {
                if (air_rep->count() == 0) air_config.replicates = 100;
                if (air_ntree->count() == 0) air_config.num_trees = 200;
            }
            const LoadResult loaded = load_csv(air_data, "Ozone");
            ReplicateDump dump;
            const AssociationTable table =
                run_airquality(loaded.data, air_config, air_dump.empty() ? nullptr : &dump);
            emit_protocol_output(table, air_out, &dump, air_dump);
            return kExitOk;
        }
        if (sim->parsed()) {
            apply_threads(sim_config.threads);
            if (sim_fast) {
                if (sim_ds->count() == 0) sim_settings.num_datasets = 20;
                if (sim_rep->count() == 0) sim_config.replicates = 100;
                if (sim_ntree->count() == 0) sim_config.num_trees = 200;
            }
            (void)sim_n;
            ReplicateDump dump;
            const AssociationTable table =
                run_simulation(sim_config, sim_settings, sim_dump.empty() ? nullptr : &dump);
            emit_protocol_output(table, sim_out, &dump, sim_dump);
            return kExitOk;
        }
        if (check->parsed()) {
            const std::vector<CheckResult> results = run_theory_checks(check_options);
            bool all_ok = true;
            for (const CheckResult& r : results) {
                std::printf("[%s] %-34s worst %.3g  %s\n", r.passed ? "PASS" : "FAIL",
                            r.name.c_str(), r.worst_residual, r.detail.c_str());
                all_ok = all_ok && r.passed;
            }
            std::printf("%zu checks, %s\n", results.size(), all_ok ? "all passed" : "FAILURES");
            return all_ok ? kExitOk : kExitCheckFailed;
        }
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}
