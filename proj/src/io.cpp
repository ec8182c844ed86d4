#include "glmselect/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "glmselect/errors.hpp"

namespace glmselect {

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable parse_csv(const std::string& text, bool has_header) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_quoted = false;
    bool record_open = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
        record_open = false;
    };

    const std::size_t n = text.size();
    for (std::size_t i = 0; i < n; ++i) {
        const char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
            case '"':
                if (!field.empty() || field_quoted)
                    throw InputError("CSV: stray quote inside an unquoted field (record " +
                                     std::to_string(records.size() + 1) + ")");
                in_quotes = true;
                field_quoted = true;
                record_open = true;
                break;
            case ',':
                end_field();
                record_open = true;
                break;
            case '\r':
                if (i + 1 < n && text[i + 1] == '\n') ++i;
                end_record();
                break;
            case '\n':
                end_record();
                break;
            default:
                if (field_quoted)
                    throw InputError("CSV: characters after a closing quote (record " +
                                     std::to_string(records.size() + 1) + ")");
                field.push_back(ch);
                record_open = true;
        }
    }
    if (in_quotes) throw InputError("CSV: unterminated quoted field");
    if (record_open || !field.empty()) end_record();

    // Blank lines carry no data.
    std::erase_if(records, [](const auto& r) { return r.size() == 1 && r[0].empty(); });

    CsvTable t;
    if (records.empty()) throw InputError("CSV: no records");
    std::size_t first = 0;
    if (has_header) {
        t.header = std::move(records[0]);
        first = 1;
    }
    const std::size_t width = has_header ? t.header.size() : records[0].size();
    for (std::size_t i = first; i < records.size(); ++i) {
        if (records[i].size() != width)
            throw InputError("CSV: record " + std::to_string(i + 1) + " has " +
                             std::to_string(records[i].size()) + " fields, expected " +
                             std::to_string(width));
        t.rows.push_back(std::move(records[i]));
    }
    return t;
}

CsvTable read_csv(const std::filesystem::path& path, bool has_header) {
    try {
        return parse_csv(read_text_file(path), has_header);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line.push_back(',');
        line += csv_field(fields[i]);
    }
    line += "\r\n";
    return line;
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
    std::size_t b = 0, e = cell.size();
    while (b < e && std::isspace(static_cast<unsigned char>(cell[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(cell[e - 1]))) --e;
    const char* first = cell.data() + b;
    if (b < e && *first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, cell.data() + e, v);
    if (b == e || ec != std::errc() || ptr != cell.data() + e || !std::isfinite(v))
        throw InputError("CSV: cell (" + std::to_string(row + 1) + ", " + std::to_string(col + 1) +
                         ") is not a finite number: '" + cell + "'");
    return v;
}

Eigen::MatrixXd numeric_matrix(const CsvTable& t, const std::vector<int>& cols) {
    std::vector<int> use = cols;
    const std::size_t width = t.rows.empty() ? t.header.size() : t.rows[0].size();
    if (use.empty())
        for (std::size_t j = 0; j < width; ++j) use.push_back(static_cast<int>(j));
    Eigen::MatrixXd M(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(use.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t j = 0; j < use.size(); ++j) {
            const auto c = static_cast<std::size_t>(use[j]);
            if (c >= t.rows[i].size()) throw InputError("CSV: column index out of range");
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_number(t.rows[i][c], i, c);
        }
    return M;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw InputError("write to '" + path.string() + "' failed");
}

}  // namespace glmselect
