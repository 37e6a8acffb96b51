#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace treevimp {

// Learning/test data: one real response and a d-dimensional covariate
// vector per row. Covariates are stored row-major. Rows never contain
// missing values; missing handling happens at CSV ingestion.
struct Dataset {
    std::size_t num_rows = 0;
    std::size_t dim = 0;
    std::vector<double> response;               // num_rows
    std::vector<double> covariates;             // num_rows * dim, row-major
    std::vector<std::string> column_names;      // dim
    std::string response_name;

    double x(std::size_t row, std::size_t var) const { return covariates[row * dim + var]; }
    double& x(std::size_t row, std::size_t var) { return covariates[row * dim + var]; }
    double y(std::size_t row) const { return response[row]; }

    const double* row(std::size_t i) const { return covariates.data() + i * dim; }

    void add_row(double y_value, const std::vector<double>& xs) {
        response.push_back(y_value);
        covariates.insert(covariates.end(), xs.begin(), xs.end());
        ++num_rows;
    }

    // Subset by row indices (repeats allowed, e.g. bootstrap samples).
    Dataset subset(const std::vector<std::size_t>& rows) const {
        Dataset out;
        out.dim = dim;
        out.column_names = column_names;
        out.response_name = response_name;
        out.response.reserve(rows.size());
        out.covariates.reserve(rows.size() * dim);
        for (std::size_t i : rows) {
            out.response.push_back(response[i]);
            out.covariates.insert(out.covariates.end(), row(i), row(i) + dim);
        }
        out.num_rows = rows.size();
        return out;
    }

    // Throws if the invariants do not hold (empty data, non-finite response,
    // dimension mismatch between rows and names).
    void validate() const;
};

} // namespace treevimp
