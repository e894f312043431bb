#pragma once
#include <stdexcept>
#include <string>

namespace lassodist {

enum class ErrorKind {
    invalid_parameter,
    dimension_mismatch,
    singular_covariance,
    degenerate_dof,
    stale_fit,
    empty_support,
    no_convergence,
    config,
    io,
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
        case ErrorKind::invalid_parameter: return "invalid-parameter";
        case ErrorKind::dimension_mismatch: return "dimension-mismatch";
        case ErrorKind::singular_covariance: return "singular-covariance";
        case ErrorKind::degenerate_dof: return "degenerate-dof";
        case ErrorKind::stale_fit: return "stale-fit";
        case ErrorKind::empty_support: return "empty-support";
        case ErrorKind::no_convergence: return "no-convergence";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what),
          kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what)
{
    if (!cond) throw Error(kind, what);
}

} // namespace lassodist
