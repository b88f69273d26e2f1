#pragma once

#include "domsde/coeffs.hpp"
#include "domsde/domain.hpp"
#include "domsde/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace domsde
{
    /// Adaptive step control:
    ///   dt = clamp(min(dt_max, c1 clearance^2 / K_est, c2 / (1 + |b|^2)), dt_min, dt_max)
    /// where K_est is the Gershgorin bound of sigma sigma^* at the current point.
    struct StepPolicy
    {
        double dt_max = 1e-2;
        double dt_min = 1e-8;
        double c1 = 0.1;
        double c2 = 1.0;
        double tol_xi = 1e-10;
        double b_max = 1e6;            // drift clipping threshold
        std::size_t clip_cap = 1000;   // more clipped steps than this: unresolved
        std::size_t max_steps = 10'000'000;

        /// Constant step dt (both adaptive terms disabled).
        static StepPolicy fixed(double dt);
        /// Throws ConfigError when the invariants 0 < dt_min <= dt_max, tol_xi > 0 fail.
        void validate() const;
    };

    enum class PathStatus
    {
        survived,  // no exit up to the horizon: xi > T
        exited,    // reached the cemetery at xi <= T
        unresolved // integrator gave up; must not be used in estimates
    };

    std::string to_string(PathStatus s);

    struct PathCounters
    {
        std::size_t steps = 0;
        std::size_t drift_clips = 0;
        std::size_t substeps = 0; // bisection iterations spent refining the exit time
        double min_boundary_distance = kInf;
        double max_step = 0.0;
    };

    /// One trajectory on its own clock t (absolute time s + t). States are stored
    /// flat, `dim` entries per time point; every recorded (s + t_k, X_k) lies in Q.
    struct PathRecord
    {
        SpaceTimePoint start;
        double horizon = 0.0;
        std::size_t dim = 0;
        std::vector<double> times;
        std::vector<double> state_data;
        /// Brownian increments dW_k of the step t_k -> t_{k+1}, when retained.
        std::vector<double> increment_data;
        PathStatus status = PathStatus::survived;
        std::optional<double> xi; // set iff status == exited
        PathCounters counters;
        std::uint64_t seed = 0;
        std::uint64_t index = 0;
        std::string note;

        std::size_t size() const noexcept { return times.size(); }
        Eigen::Map<const Vector> state(std::size_t k) const;
        Eigen::Map<const Vector> increment(std::size_t k) const;
        bool has_increments() const noexcept { return !increment_data.empty(); }
        bool cemetery() const noexcept { return status == PathStatus::exited; }
        /// Time the path stops contributing: xi when exited, otherwise the last recorded time.
        double end_time() const noexcept;
    };

    struct SimulationOptions
    {
        bool keep_increments = false;
    };

    /// Step size from precomputed ingredients; see StepPolicy.
    double step_size(const StepPolicy &policy, double clearance, double drift_norm, double k_est) noexcept;
    /// Step size at p, evaluating coefficients and the domain clearance.
    double step_size(const StepPolicy &policy, const SpaceTimePoint &p, const CoefficientSet &coeffs,
                     const SpaceTimeDomain &domain);

    /// Euler-Maruyama path of dX = b(s+t, X) dt + sigma(s+t, X) dW started at (s, x) = start,
    /// killed at the first exit of (s+t, X_t) from Q. Gaussian draws come from
    /// make_stream(seed, index) in a fixed order (d per step), so the record is a pure
    /// function of its inputs.
    PathRecord simulate_path(const CoefficientSet &coeffs, const SpaceTimeDomain &domain, const SpaceTimePoint &start,
                             double horizon, const StepPolicy &policy, std::uint64_t seed, std::uint64_t index,
                             const SimulationOptions &options = {});

    /// Paths 0..n-1 on a worker pool; the result is independent of `workers`.
    std::vector<PathRecord> simulate_paths(const CoefficientSet &coeffs, const SpaceTimeDomain &domain,
                                           const SpaceTimePoint &start, double horizon, const StepPolicy &policy,
                                           std::uint64_t seed, std::size_t n_paths, std::size_t workers,
                                           const SimulationOptions &options = {});

    /// Number of completed runs from closure(Q^n) to the complement of Q^{n+1} on the
    /// discrete path. The counter is armed at time 0 when the start lies in closure(Q^n),
    /// otherwise at the first recorded entry; each exit from Q^{n+1} while armed counts
    /// and disarms until the next entry into closure(Q^n). Reaching the cemetery counts
    /// as an exit.
    std::size_t run_counter(const PathRecord &path, const SpaceTimeDomain &domain, int n);
    std::size_t run_counter(const PathRecord &path, const Region &level_n, const Region &level_n1);

    /// First recorded clock time with (s + t_k, X_k) outside closure(Q^n), or xi when the
    /// path dies inside; empty when the path stays in closure(Q^n). Using the closure keeps a
    /// start on the boundary of Q^n (such as t = 0) from counting as an exit.
    std::optional<double> level_exit_time(const PathRecord &path, const Region &level);
}
