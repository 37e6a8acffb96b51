#include "treevimp/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace treevimp {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw std::runtime_error("unparseable cell '" + cell + "' at line " +
                                 std::to_string(line_no) + ", column " + column);
    return value;
}

} // namespace

LoadResult load_csv_text(const std::string& text, const std::string& response_column,
                         MissingPolicy policy) {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw std::runtime_error("empty csv");
    std::vector<std::string> header = split_line(line);
    for (std::string& h : header) h = trim(h);
    if (header.empty()) throw std::runtime_error("empty csv header");

    const auto it = std::find(header.begin(), header.end(), response_column);
    if (it == header.end())
        throw std::runtime_error("response column '" + response_column + "' not found");
    const std::size_t response_index = static_cast<std::size_t>(it - header.begin());

    LoadResult out;
    out.data.response_name = response_column;
    out.data.dim = header.size() - 1;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (j != response_index) out.data.column_names.push_back(header[j]);

    std::size_t line_no = 1;
    std::vector<double> xs;
    while (std::getline(ss, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("line " + std::to_string(line_no) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        bool missing = false;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            cells[j] = trim(cells[j]);
            if (is_missing(cells[j])) {
                if (policy == MissingPolicy::Fail)
                    throw std::runtime_error("missing value at line " + std::to_string(line_no) +
                                             ", column " + header[j]);
                missing = true;
            }
        }
        if (missing) {
            ++out.dropped_rows;
            continue;
        }
        double y = 0.0;
        xs.clear();
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const double value = parse_cell(cells[j], line_no, header[j]);
            if (j == response_index)
                y = value;
            else
                xs.push_back(value);
        }
        out.data.add_row(y, xs);
    }
    out.data.validate();
    return out;
}

LoadResult load_csv(const std::string& path, const std::string& response_column,
                    MissingPolicy policy) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return load_csv_text(buffer.str(), response_column, policy);
}

} // namespace treevimp
