#include "treevimp/report.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace treevimp {

namespace {

std::string fixed6(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    return buf;
}

} // namespace

std::string table_to_csv(const AssociationTable& table) {
    std::string out = "pair,paired,additive,association,assoc_per_mse\n";
    for (const AssociationTable::Row& row : table.rows) {
        out += row.label;
        out += ',';
        out += fixed6(row.paired);
        out += ',';
        out += fixed6(row.additive);
        out += ',';
        out += fixed6(row.association);
        out += ',';
        out += fixed6(row.standardized);
        out += '\n';
    }
    return out;
}

std::string table_to_json(const AssociationTable& table) {
    nlohmann::json j;
    j["reference_mse"] = table.reference_mse;
    j["replicates"] = table.replicates;
    j["seed"] = table.seed;
    j["config"] = table.config;
    j["rows"] = nlohmann::json::array();
    for (const AssociationTable::Row& row : table.rows)
        j["rows"].push_back({{"pair", row.label},
                             {"paired", row.paired},
                             {"additive", row.additive},
                             {"association", row.association},
                             {"assoc_per_mse", row.standardized}});
    return j.dump(2) + "\n";
}

AssociationTable table_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    AssociationTable table;
    table.reference_mse = j.at("reference_mse").get<double>();
    table.replicates = j.at("replicates").get<int>();
    table.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("config")) table.config = j.at("config").get<std::map<std::string, std::string>>();
    for (const auto& jr : j.at("rows"))
        table.rows.push_back({jr.at("pair").get<std::string>(),
                              jr.at("paired").get<double>(),
                              jr.at("additive").get<double>(),
                              jr.at("association").get<double>(),
                              jr.at("assoc_per_mse").get<double>()});
    return table;
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << contents;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

} // namespace treevimp
