#pragma once

#include "dmlme/types.hpp"

#include <string>
#include <vector>

namespace dmlme {

/// Column layout of a grouped-data CSV file. All named columns must exist in
/// the header and the name sets must be disjoint.
struct CsvSchema {
    std::string group_col;
    std::string y_col;
    std::vector<std::string> x_cols;
    std::vector<std::string> w_cols;
    std::vector<std::string> z_cols;
};

/// Reads an RFC-4180-style CSV file (header row, double-quote escaping,
/// dot-decimal numbers) and assembles a validated dataset. Rows are grouped
/// by the group column; groups keep first-appearance order and rows keep
/// file order. Parse failures report the file line.
GroupedDataset load_csv(const std::string& path, const CsvSchema& schema);

/// Writes a dataset with shortest round-trip number formatting, so a
/// write/read cycle reproduces every finite double bit-exactly.
void write_csv(const std::string& path, const GroupedDataset& dataset, const CsvSchema& schema);

} // namespace dmlme
