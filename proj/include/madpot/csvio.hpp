#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "madpot/matrix.hpp"

namespace madpot {

// Shortest representation that round-trips a double (up to 17 significant digits).
std::string format_double(double v);

// Comma-separated, one matrix row per line, LF endings.
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(std::ostream& out, const Matrix& m);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m);

// A vector CSV is either a single row or a single column.
std::vector<double> read_csv_vector(const std::filesystem::path& path);

}  // namespace madpot
