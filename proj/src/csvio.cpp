#include "madpot/csvio.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <vector>

#include "madpot/errors.hpp"

namespace madpot {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::vector<std::vector<double>> read_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("csv: cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (;;) {
            while (p < end && *p == ' ') ++p;
            double v = 0.0;
            const auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc())
                throw ParseError("csv: " + path.string() + " line " + std::to_string(line_no) +
                                 ": cannot parse number");
            row.push_back(v);
            p = next;
            while (p < end && *p == ' ') ++p;
            if (p == end) break;
            if (*p != ',')
                throw ParseError("csv: " + path.string() + " line " + std::to_string(line_no) +
                                 ": expected comma");
            ++p;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

Matrix read_csv_matrix(const std::filesystem::path& path) {
    const auto rows = read_rows(path);
    if (rows.empty()) throw ParseError("csv: " + path.string() + " is empty");
    const std::size_t cols = rows[0].size();
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols)
            throw ParseError("csv: " + path.string() + ": ragged row " + std::to_string(r + 1));
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    }
    return m;
}

void write_csv_matrix(std::ostream& out, const Matrix& m) {
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("csv: cannot open " + path.string() + " for writing");
    write_csv_matrix(out, m);
    if (!out) throw IoError("csv: write failed for " + path.string());
}

std::vector<double> read_csv_vector(const std::filesystem::path& path) {
    const Matrix m = read_csv_matrix(path);
    if (m.rows != 1 && m.cols != 1)
        throw ParseError("csv: " + path.string() + " is not a vector (one row or one column)");
    return m.data;
}

}  // namespace madpot
