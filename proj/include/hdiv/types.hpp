#pragma once
#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdiv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexSet = std::vector<Index>;

/// Broad failure category, used by the CLI to pick an exit code.
enum class ErrorKind { Config, Data, Numeric, Io };

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Data: return "data";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Indices j with v[j] != 0 (literal zero test).
inline IndexSet nonzero_support(const Vector& v)
{
    IndexSet out;
    for (Index j = 0; j < v.size(); ++j) {
        if (v[j] != 0.0) out.push_back(j);
    }
    return out;
}

inline IndexSet full_support(Index p)
{
    IndexSet out(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) out[static_cast<std::size_t>(j)] = j;
    return out;
}

} // namespace hdiv
