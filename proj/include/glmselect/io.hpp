#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glmselect {

struct CsvTable {
    std::vector<std::string> header;  // empty when the file has no header row
    std::vector<std::vector<std::string>> rows;

    // Column position by header name, or -1.
    int column(const std::string& name) const;
};

// RFC-4180 parsing: quoted fields, doubled quotes, CRLF or LF line ends.
// Rows must all have the same width. Throws InputError on malformed input.
CsvTable parse_csv(const std::string& text, bool has_header);
CsvTable read_csv(const std::filesystem::path& path, bool has_header);

// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_field(const std::string& s);
std::string csv_line(const std::vector<std::string>& fields);

// 17 significant digits ("%.17g"); nan / inf / -inf spelled out.
std::string format_double(double x);

// Strict numeric parse of one CSV cell.
double parse_number(const std::string& cell, std::size_t row, std::size_t col);

// Every cell of the selected columns as doubles (all columns when empty).
Eigen::MatrixXd numeric_matrix(const CsvTable& t, const std::vector<int>& cols = {});

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace glmselect
