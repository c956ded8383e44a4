#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace idsir {

using Vector = Eigen::VectorXd;
/// Row-major so that one row is one time slice of a (time x space) field.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Shapes of fields/grids/controls that do not fit together.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Time stepping produced an invalid state (negative density, NaN, ...).
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent scenario configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace idsir
