#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace treevimp {

// Replicate-averaged pair report, one row per unordered variable pair.
struct AssociationTable {
    struct Row {
        std::string label;         // "Temp:Wind" or a single variable name
        double paired = 0.0;
        double additive = 0.0;
        double association = 0.0;  // paired - additive
        double standardized = 0.0; // association / reference_mse * 100
    };

    std::vector<Row> rows;
    double reference_mse = 0.0;
    int replicates = 0;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;   // run settings, for the JSON form
};

// CSV columns exactly "pair,paired,additive,association,assoc_per_mse",
// values with 6 decimal places. An empty table emits the header only.
std::string table_to_csv(const AssociationTable& table);

// JSON mirrors the struct, including seed and config.
std::string table_to_json(const AssociationTable& table);
AssociationTable table_from_json(const std::string& text);

void write_file(const std::string& path, const std::string& contents);

} // namespace treevimp
