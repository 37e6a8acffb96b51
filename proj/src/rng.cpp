#include "treevimp/rng.hpp"

#include <algorithm>
#include <numeric>

namespace treevimp {

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(uniform_int(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

} // namespace treevimp
