#include "idsir/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace idsir {

namespace {

std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    return out;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

double parse(const std::string& text, const std::filesystem::path& path, std::size_t line)
{
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
        throw ConfigError(path.string() + ":" + std::to_string(line) + ": bad number '" + text + "'");
    }
    return v;
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

RawTable read_table(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    RawTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto cells = split(line);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected "
                              + std::to_string(table.header.size()) + " columns");
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            row.push_back(parse(c, path, line_no));
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) {
        throw ConfigError(path.string() + ": empty file");
    }
    return table;
}

FieldTable to_field(RawTable raw, const std::filesystem::path& path)
{
    if (raw.header.size() < 2 || raw.header.front() != "t") {
        throw ConfigError(path.string() + ": header must start with 't' and name at least one column");
    }
    FieldTable out;
    const auto rows = static_cast<Eigen::Index>(raw.rows.size());
    const auto cols = static_cast<Eigen::Index>(raw.header.size() - 1);
    out.times.resize(rows);
    out.values.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = raw.rows[static_cast<std::size_t>(i)];
        out.times[i] = row[0];
        for (Eigen::Index j = 0; j < cols; ++j) {
            out.values(i, j) = row[static_cast<std::size_t>(j) + 1];
        }
    }
    out.header = std::move(raw.header);
    return out;
}

} // namespace

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_field_csv(const std::filesystem::path& path, const Vector& times, const Matrix& values)
{
    if (times.size() != values.rows()) {
        throw DimensionError("write_field_csv: times and rows differ");
    }
    auto out = open_out(path);
    out << 't';
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        out << ",x_" << j;
    }
    out << '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        out << format_double(times[i]);
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            out << ',' << format_double(values(i, j));
        }
        out << '\n';
    }
}

FieldTable read_field_csv(const std::filesystem::path& path)
{
    return to_field(read_table(path), path);
}

void write_iterations_csv(const std::filesystem::path& path, const std::vector<double>& j_log)
{
    auto out = open_out(path);
    out << "iter,J\n";
    for (std::size_t i = 0; i < j_log.size(); ++i) {
        out << i << ',' << format_double(j_log[i]) << '\n';
    }
}

std::vector<double> read_iterations_csv(const std::filesystem::path& path)
{
    const RawTable raw = read_table(path);
    if (raw.header != std::vector<std::string>{"iter", "J"}) {
        throw ConfigError(path.string() + ": header must be 'iter,J'");
    }
    std::vector<double> out;
    for (const auto& row : raw.rows) {
        out.push_back(row[1]);
    }
    return out;
}

void write_control_csv(const std::filesystem::path& path, const ControlField& control)
{
    const Vector times = Vector::LinSpaced(static_cast<Eigen::Index>(control.n_times()), 0.0,
                                           control.dt() * static_cast<double>(control.n_times() - 1));
    if (control.kind() != ControlKind::TimeOnly) {
        write_field_csv(path, times, control.dense());
        return;
    }
    auto out = open_out(path);
    out << "t,u\n";
    for (Eigen::Index i = 0; i < times.size(); ++i) {
        out << format_double(times[i]) << ',' << format_double(control.dofs()(i, 0)) << '\n';
    }
}

ControlField read_control_csv(const std::filesystem::path& path, std::size_t n_cells)
{
    const FieldTable table = read_field_csv(path);
    if (table.times.size() < 2) {
        throw ConfigError(path.string() + ": need at least two time rows");
    }
    const double dt = table.times[1] - table.times[0];
    if (table.header.size() == 2 && table.header[1] == "u") {
        return ControlField::time_only(table.values.col(0), dt, n_cells);
    }
    if (static_cast<std::size_t>(table.values.cols()) != n_cells) {
        throw DimensionError(path.string() + ": expected " + std::to_string(n_cells) + " cells");
    }
    return ControlField::space_time(table.values, dt);
}

StateField read_state(const std::filesystem::path& z_csv, const std::filesystem::path& r_csv)
{
    FieldTable z = read_field_csv(z_csv);
    FieldTable r = read_field_csv(r_csv);
    if (z.values.rows() != r.values.rows() || z.values.cols() != r.values.cols()
        || z.times != r.times) {
        throw DimensionError("read_state: " + z_csv.string() + " and " + r_csv.string() + " differ in shape");
    }
    StateField out;
    out.times = std::move(z.times);
    out.z = std::move(z.values);
    out.r = std::move(r.values);
    return out;
}

} // namespace idsir
