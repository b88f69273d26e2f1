#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace domsde
{
    using Vector = Eigen::VectorXd;
    using Matrix = Eigen::MatrixXd;

    /// A point (t, x) of the space-time half-space R_+ x R^d.
    struct SpaceTimePoint
    {
        double t = 0.0;
        Vector x;

        std::size_t dim() const noexcept { return static_cast<std::size_t>(x.size()); }
    };

    std::string describe(const SpaceTimePoint &p);

    // Error hierarchy. Configuration problems derive from std::invalid_argument,
    // numerical/runtime conditions from std::runtime_error.

    class ConfigError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    class DimensionError : public ConfigError
    {
    public:
        DimensionError(std::size_t expected, std::size_t got);
    };

    /// Raised when a value violates a mathematical constraint (e.g. epsilon outside [0,2)).
    class DomainConstraintError : public ConfigError
    {
    public:
        using ConfigError::ConfigError;
    };

    class PreconditionError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    class EmptyRegionError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// A finite-difference stencil would leave the domain.
    class StencilError : public std::runtime_error
    {
    public:
        StencilError(double required, double available);
        double required_clearance;
        double available_clearance;
    };

    /// A coefficient was evaluated at (or numerically on top of) a singularity.
    class SingularityError : public std::runtime_error
    {
    public:
        explicit SingularityError(SpaceTimePoint where, const std::string &what = "non-finite value");
        SpaceTimePoint point;
    };

    class SingularDiffusionError : public std::runtime_error
    {
    public:
        explicit SingularDiffusionError(SpaceTimePoint where);
        SpaceTimePoint point;
    };
}
