#pragma once

#include "domsde/coeffs.hpp"
#include "domsde/domain.hpp"
#include "domsde/integrate.hpp"
#include "domsde/lyapunov.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace domsde
{
    /// estimate and se are over the n_used resolved paths; unresolved paths are
    /// counted separately and never enter the estimate.
    struct MonteCarloReport
    {
        std::string estimand;
        double estimate = 0.0;
        double se = 0.0;
        std::size_t n_paths = 0;
        std::size_t n_used = 0;
        std::size_t n_unresolved = 0;
        double ess = 0.0;
        std::uint64_t seed = 0;
        std::string config_digest;
        bool valid = true;
        std::vector<std::string> warnings;
        nlohmann::json extras = nlohmann::json::object();
    };

    nlohmann::json to_json(const MonteCarloReport &r);

    /// Everything needed to generate the path ensemble 0..n_paths-1.
    struct SimulationSetup
    {
        CoefficientSet coeffs;
        DomainPtr domain;
        SpaceTimePoint start;
        double horizon = 1.0;
        StepPolicy policy;
        std::uint64_t seed = 0;
        std::size_t n_paths = 1000;
        std::size_t workers = 1;
    };

    /// Pairwise (cascade) sum in index order; the result depends only on the sequence.
    double pairwise_sum(const double *values, std::size_t n);
    double pairwise_sum(const std::vector<double> &values);

    /// Per-path functionals: `width` numbers per path, produced in parallel and stored
    /// by path index.
    struct PathBatch
    {
        std::size_t n_paths = 0;
        std::size_t width = 0;
        std::vector<double> values;
        std::vector<PathStatus> status;
        std::vector<PathCounters> counters;

        double value(std::size_t path, std::size_t column) const { return values[path * width + column]; }
        std::size_t unresolved() const;
    };

    using PathFunctional = std::function<void(const PathRecord &, double *out)>;

    PathBatch run_batch(const SimulationSetup &setup, std::size_t width, const PathFunctional &functional,
                        const SimulationOptions &options = {});

    /// Mean and standard error of one column over resolved paths, with the standard
    /// validity rules: more than 1% unresolved marks the report invalid.
    MonteCarloReport summarize(const PathBatch &batch, std::size_t column, const std::string &estimand,
                               const SimulationSetup &setup);

    /// P(xi <= T) with binomial standard error.
    MonteCarloReport explosion_probability(const SimulationSetup &setup);
    /// P(xi <= T_i) for nested horizons from one ensemble simulated to max T_i, so the
    /// estimates are nondecreasing pathwise.
    std::vector<MonteCarloReport> explosion_probability_curve(const SimulationSetup &setup,
                                                              const std::vector<double> &horizons);

    struct LifetimeSummary
    {
        MonteCarloReport explosion;       // P(xi <= T)
        MonteCarloReport mean_exited_xi;  // E[xi | xi <= T]
        MonteCarloReport mean_censored_xi; // E[xi ^ T]
    };

    LifetimeSummary lifetime_statistics(const SimulationSetup &setup);

    struct TerminalMoments
    {
        MonteCarloReport mean;     // E[X_T] (first coordinate) over surviving paths
        MonteCarloReport variance; // Var[X_T], se from the fourth central moment
    };

    TerminalMoments terminal_moments(const SimulationSetup &setup, std::size_t coordinate = 0);

    /// E sup_{t <= T ^ xi} exp(mu phi(s+t, X_t) + mu nu |X_t|^2) over the recorded grid.
    /// Requires a gradient-type coefficient set. Overflow makes the estimate +inf and the
    /// report invalid.
    MonteCarloReport sup_exp_moment(const SimulationSetup &setup, const TheoremConstants &constants);

    struct KrylovFunction
    {
        std::string name;
        ScalarField f;
        std::vector<double> lo; // truncation box for the norm
        std::vector<double> hi;
    };

    struct KrylovResult
    {
        std::vector<MonteCarloReport> members; // ratio per family member (numerator in extras)
        double max_ratio = 0.0;
    };

    /// E int_S^{T ^ xi} |f(t, X_t)| dt (left-endpoint rule) divided by the L^q_p norm of f
    /// over [S, T] x box. Zero-norm members are skipped with a warning.
    KrylovResult krylov_ratio(const SimulationSetup &setup, const std::vector<KrylovFunction> &family, double S,
                              double p, double q, std::size_t norm_resolution = 256);

    /// E exp(kappa int_0^{T ^ xi} |g(t, X_t)|^2 dt), left-endpoint rule; warns when the
    /// largest 1% of values carry more than half of the total.
    MonteCarloReport exp_functional(const SimulationSetup &setup, const ScalarField &g, double kappa);

    /// E nu^alpha with nu the run count between levels n and n+1 on [0, S ^ xi], S = setup.horizon,
    /// and 0^alpha := 0 for every alpha (so alpha = 0 estimates P(nu >= 1)).
    MonteCarloReport run_moment(const SimulationSetup &setup, int n_level, double alpha);

    /// log of the discrete Girsanov density of b2 against b1 along a path generated under b1
    /// with retained increments:
    ///   sum_k y_k . dW_k - (1/2) sum_k |y_k|^2 dt_k,  y_k = sigma^{-1}(b2 - b1) at (s + t_k, X_k).
    double girsanov_log_weight(const PathRecord &path, const VectorField &b1, const VectorField &b2,
                               const DiffusionField &diff);
    double girsanov_weight(const PathRecord &path, const VectorField &b1, const VectorField &b2,
                           const DiffusionField &diff);

    struct GirsanovCheck
    {
        MonteCarloReport weight_mean;  // E rho, which is 1 for a true density
        MonteCarloReport reweighted;   // E f(X_T^(1)) rho
        MonteCarloReport direct;       // E f(X_T^(2)) simulated under b2 with seed + 1
        double z_weight = 0.0;         // (mean rho - 1) / se
        double z_cross = 0.0;          // (reweighted - direct) / combined se
    };

    /// setup.coeffs carries b1; b2 replaces the drift for the direct estimate.
    GirsanovCheck girsanov_check(const SimulationSetup &setup, const VectorField &b2, const ScalarField &f);
}
