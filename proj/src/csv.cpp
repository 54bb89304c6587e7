#include "dmlme/csv.hpp"

#include "dmlme/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace dmlme {

namespace {

/// Splits one CSV record. `line` must contain a complete record (multiline
/// quoted fields are stitched together by the caller).
std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted) {
        throw DataError("line " + std::to_string(line_no) + ": unterminated quoted field");
    }
    fields.push_back(std::move(field));
    return fields;
}

double parse_number(const std::string& cell, const std::string& column, std::size_t line_no) {
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
    if (begin < end && *begin == '+') ++begin;
    double value = 0.0;
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end || begin == end) {
        throw DataError("line " + std::to_string(line_no) + ": non-numeric cell '" + cell +
                        "' in column '" + column + "'");
    }
    return value;
}

std::string quote_if_needed(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::string format_double(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

void check_schema(const CsvSchema& schema) {
    std::unordered_set<std::string> names;
    auto add = [&](const std::string& name) {
        if (name.empty()) throw DataError("csv schema: empty column name");
        if (!names.insert(name).second) {
            throw DataError("csv schema: column '" + name + "' named more than once");
        }
    };
    add(schema.group_col);
    add(schema.y_col);
    for (const auto& n : schema.x_cols) add(n);
    for (const auto& n : schema.w_cols) add(n);
    for (const auto& n : schema.z_cols) add(n);
    if (schema.x_cols.empty()) throw DataError("csv schema: no x columns");
    if (schema.w_cols.empty()) throw DataError("csv schema: no w columns");
    if (schema.z_cols.empty()) throw DataError("csv schema: no z columns");
}

} // namespace

GroupedDataset load_csv(const std::string& path, const CsvSchema& schema) {
    check_schema(schema);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open CSV file '" + path + "'");

    // Read physical lines, stitching records whose quoted fields span lines.
    auto next_record = [&](std::string& record, std::size_t& line_no) -> bool {
        record.clear();
        std::string line;
        bool have_any = false;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            record += have_any ? "\n" + line : line;
            have_any = true;
            const std::size_t quotes = std::count(record.begin(), record.end(), '"');
            if (quotes % 2 == 0) return true;
        }
        return have_any;
    };

    std::size_t line_no = 0;
    std::string record;
    if (!next_record(record, line_no)) {
        throw DataError("CSV file '" + path + "' is empty (missing header row)");
    }
    const std::vector<std::string> header = split_record(record, line_no);
    std::unordered_map<std::string, std::size_t> column_index;
    for (std::size_t j = 0; j < header.size(); ++j) column_index[header[j]] = j;

    auto require = [&](const std::string& name) -> std::size_t {
        const auto it = column_index.find(name);
        if (it == column_index.end()) {
            throw DataError("unknown column '" + name + "' (not in the CSV header)");
        }
        return it->second;
    };
    const std::size_t group_idx = require(schema.group_col);
    const std::size_t y_idx = require(schema.y_col);
    std::vector<std::size_t> x_idx, w_idx, z_idx;
    for (const auto& n : schema.x_cols) x_idx.push_back(require(n));
    for (const auto& n : schema.w_cols) w_idx.push_back(require(n));
    for (const auto& n : schema.z_cols) z_idx.push_back(require(n));

    struct RawGroup {
        std::vector<double> y;
        std::vector<std::vector<double>> x, w, z;
    };
    std::vector<std::string> group_order;
    std::unordered_map<std::string, RawGroup> raw;

    while (next_record(record, line_no)) {
        if (record.empty()) continue;
        const std::vector<std::string> fields = split_record(record, line_no);
        if (fields.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        const std::string& group_id = fields[group_idx];
        auto it = raw.find(group_id);
        if (it == raw.end()) {
            group_order.push_back(group_id);
            it = raw.emplace(group_id, RawGroup{}).first;
        }
        RawGroup& rg = it->second;
        rg.y.push_back(parse_number(fields[y_idx], schema.y_col, line_no));
        auto parse_block = [&](const std::vector<std::size_t>& idx,
                               const std::vector<std::string>& names,
                               std::vector<std::vector<double>>& dst) {
            std::vector<double> row(idx.size());
            for (std::size_t j = 0; j < idx.size(); ++j) {
                row[j] = parse_number(fields[idx[j]], names[j], line_no);
            }
            dst.push_back(std::move(row));
        };
        parse_block(x_idx, schema.x_cols, rg.x);
        parse_block(w_idx, schema.w_cols, rg.w);
        parse_block(z_idx, schema.z_cols, rg.z);
    }

    GroupedDataset dataset;
    for (const std::string& id : group_order) {
        const RawGroup& rg = raw.at(id);
        const Index n = static_cast<Index>(rg.y.size());
        Group g;
        g.id = id;
        g.y.resize(n);
        g.x.resize(n, static_cast<Index>(schema.x_cols.size()));
        g.w.resize(n, static_cast<Index>(schema.w_cols.size()));
        g.z.resize(n, static_cast<Index>(schema.z_cols.size()));
        for (Index i = 0; i < n; ++i) {
            g.y(i) = rg.y[i];
            for (Index j = 0; j < g.x.cols(); ++j) g.x(i, j) = rg.x[i][j];
            for (Index j = 0; j < g.w.cols(); ++j) g.w(i, j) = rg.w[i][j];
            for (Index j = 0; j < g.z.cols(); ++j) g.z(i, j) = rg.z[i][j];
        }
        dataset.groups.push_back(std::move(g));
    }
    return validate_dataset(std::move(dataset));
}

void write_csv(const std::string& path, const GroupedDataset& dataset, const CsvSchema& schema) {
    check_schema(schema);
    if (static_cast<Index>(schema.x_cols.size()) != dataset.d ||
        static_cast<Index>(schema.w_cols.size()) != dataset.v ||
        static_cast<Index>(schema.z_cols.size()) != dataset.q) {
        throw DataError("csv schema column counts do not match the dataset dimensions");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");

    out << quote_if_needed(schema.group_col) << "," << quote_if_needed(schema.y_col);
    for (const auto& n : schema.x_cols) out << "," << quote_if_needed(n);
    for (const auto& n : schema.w_cols) out << "," << quote_if_needed(n);
    for (const auto& n : schema.z_cols) out << "," << quote_if_needed(n);
    out << "\n";

    for (const Group& g : dataset.groups) {
        for (Index i = 0; i < g.rows(); ++i) {
            out << quote_if_needed(g.id) << "," << format_double(g.y(i));
            for (Index j = 0; j < g.x.cols(); ++j) out << "," << format_double(g.x(i, j));
            for (Index j = 0; j < g.w.cols(); ++j) out << "," << format_double(g.w(i, j));
            for (Index j = 0; j < g.z.cols(); ++j) out << "," << format_double(g.z(i, j));
            out << "\n";
        }
    }
    if (!out) throw DataError("failed while writing '" + path + "'");
}

} // namespace dmlme
