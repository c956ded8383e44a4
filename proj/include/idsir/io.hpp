#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "idsir/optimal_control.hpp"
#include "idsir/sir_forward.hpp"
#include "idsir/types.hpp"

namespace idsir {

/// A CSV whose first column is time and the rest are values per cell.
struct FieldTable {
    std::vector<std::string> header;
    Vector times;
    Matrix values;
};

/// Writes `t,x_0,...,x_{n-1}` then one row per time node, 17 significant digits.
void write_field_csv(const std::filesystem::path& path, const Vector& times, const Matrix& values);
/// Throws ConfigError naming the file and line on malformed input.
FieldTable read_field_csv(const std::filesystem::path& path);

void write_iterations_csv(const std::filesystem::path& path, const std::vector<double>& j_log);
std::vector<double> read_iterations_csv(const std::filesystem::path& path);

/// Rows are time nodes. TimeOnly controls have a single `u` column, other
/// kinds are written densely as `x_0,...`.
void write_control_csv(const std::filesystem::path& path, const ControlField& control);
/// A single `u` column gives a TimeOnly control over `n_cells` cells,
/// anything else a SpaceTime control.
ControlField read_control_csv(const std::filesystem::path& path, std::size_t n_cells);

StateField read_state(const std::filesystem::path& z_csv, const std::filesystem::path& r_csv);

/// %.17g, which round-trips every double.
std::string format_double(double v);

} // namespace idsir
