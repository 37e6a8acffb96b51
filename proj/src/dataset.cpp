#include "treevimp/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace treevimp {

void Dataset::validate() const {
    if (num_rows == 0) throw std::runtime_error("empty learning data");
    if (dim == 0) throw std::runtime_error("dataset has no covariates");
    if (response.size() != num_rows || covariates.size() != num_rows * dim)
        throw std::runtime_error("dataset storage is inconsistent");
    for (double value : response)
        if (!std::isfinite(value)) throw std::runtime_error("invalid response");
    for (double value : covariates)
        if (!std::isfinite(value)) throw std::runtime_error("invalid covariate value");
}

} // namespace treevimp
