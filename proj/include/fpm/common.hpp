#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fpm {

/// Point, cell and facet indices. Matches Eigen's default sparse index type.
using Index = int;
inline constexpr Index kNone = -1;

/// Coordinates are always stored with three components; 2D problems keep z = 0.
using Vec3 = Eigen::Vector3d;

enum class ErrorKind {
    Config,
    Domain,
    DegenerateCell,
    DegenerateGeometry,
    DegenerateSupport,
    Contract,
    Numeric,
    Solver,
    Assembly,
    Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

/// Runtime knobs shared by the compute modules.
struct ExecutionPolicy {
    int threads = 1;
    /// Forces ordered scatter and serial reductions so repeated runs are
    /// bit-identical regardless of thread count.
    bool deterministic = false;
};

} // namespace fpm
