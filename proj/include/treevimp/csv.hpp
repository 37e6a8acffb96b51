#pragma once

#include <string>

#include "treevimp/dataset.hpp"

namespace treevimp {

enum class MissingPolicy { DropRow, Fail };

struct LoadResult {
    Dataset data;
    int dropped_rows = 0;
};

// Reads a headered CSV of reals into a Dataset, taking `response_column` as
// the response and every other column as a covariate. Cells that are empty
// or the literal "NA" count as missing: DropRow removes the row
// (complete-case), Fail raises. Unparseable cells always raise, with the
// row/column location in the message.
LoadResult load_csv(const std::string& path, const std::string& response_column,
                    MissingPolicy policy = MissingPolicy::DropRow);

LoadResult load_csv_text(const std::string& text, const std::string& response_column,
                         MissingPolicy policy = MissingPolicy::DropRow);

} // namespace treevimp
