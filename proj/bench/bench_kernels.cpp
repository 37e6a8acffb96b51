// Compares the OpenMP kernels against the serial reference implementations.
// The two must produce identical results; the point of the benchmark is the
// wall-clock ratio on multi-core machines.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "treevimp/experiments.hpp"
#include "treevimp/forest.hpp"
#include "treevimp/serial_ref.hpp"
#include "treevimp/vimp.hpp"

using namespace treevimp;

namespace {

double time_ms(const std::function<void()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count();
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-24s serial %9.1f ms   parallel %9.1f ms   speedup %5.2fx   %s\n", name.c_str(),
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "results identical" : "RESULTS DIFFER");
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled; both columns run serially\n");
#endif

    const Dataset data = draw_simulation_dataset(2000, false, 7);
    const Dataset test = draw_simulation_dataset(500, false, 8);

    ForestConfig fc;
    fc.num_trees = 200;
    fc.mtry = 3;
    fc.bootstrap = true;
    fc.min_node_size = 5;
    fc.seed = 42;

    Forest serial_forest, parallel_forest;
    const double grow_serial = time_ms([&] { serial_forest = serial::grow_forest(data, fc); });
    const double grow_parallel = time_ms([&] { parallel_forest = grow_forest(data, fc); });
    report("grow_forest", grow_serial, grow_parallel,
           forest_to_json(serial_forest) == forest_to_json(parallel_forest));

    const Tree& tree = parallel_forest.trees.front();
    const int vars[1] = {0};
    VimpResult mc_serial, mc_parallel;
    const double mc_serial_ms = time_ms([&] {
        Rng rng(11);
        mc_serial = serial::delta_mc(tree, vars, test, 20000, NoisingMode::FullRandom, rng);
    });
    const double mc_parallel_ms = time_ms([&] {
        Rng rng(11);
        mc_parallel = delta_mc(tree, vars, test, 20000, NoisingMode::FullRandom, rng);
    });
    report("delta_mc", mc_serial_ms, mc_parallel_ms,
           mc_serial.delta == mc_parallel.delta &&
               mc_serial.std_error.value_or(-1) == mc_parallel.std_error.value_or(-1));

    VimpResult perm_serial, perm_parallel;
    const double perm_serial_ms = time_ms([&] {
        Rng rng(12);
        perm_serial = serial::permutation_vimp(parallel_forest, test, vars, 500, rng);
    });
    const double perm_parallel_ms = time_ms([&] {
        Rng rng(12);
        perm_parallel = permutation_vimp(parallel_forest, test, vars, 500, rng);
    });
    report("permutation_vimp", perm_serial_ms, perm_parallel_ms,
           perm_serial.delta == perm_parallel.delta &&
               perm_serial.std_error.value_or(-1) == perm_parallel.std_error.value_or(-1));
    return 0;
}
