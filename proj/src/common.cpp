#include "fpm/common.hpp"

namespace fpm {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Config: return "config error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::DegenerateCell: return "degenerate cell";
    case ErrorKind::DegenerateGeometry: return "degenerate geometry";
    case ErrorKind::DegenerateSupport: return "degenerate support";
    case ErrorKind::Contract: return "contract violation";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Solver: return "solver error";
    case ErrorKind::Assembly: return "assembly error";
    case ErrorKind::Io: return "i/o error";
    }
    return "error";
}

void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

} // namespace fpm
