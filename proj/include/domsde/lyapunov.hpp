#pragma once

#include "domsde/coeffs.hpp"
#include "domsde/domain.hpp"
#include "domsde/region.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace domsde
{
    enum class Inequality
    {
        drift_condition,
        elliptic_condition,
        condition_h,
        ellipticity,
        lipschitz_a
    };

    enum class Verdict
    {
        pass,
        fail,
        inconclusive
    };

    std::string to_string(Inequality id);
    std::string to_string(Verdict v);

    /// Outcome of a grid check. verdict == fail exactly when violation_count > 0;
    /// `violations` holds the first max_recorded offending points.
    struct LyapunovCertificate
    {
        Inequality inequality = Inequality::drift_condition;
        Verdict verdict = Verdict::inconclusive;
        std::string constant_name;
        double constant = 0.0;           // tightest constant found on the grid
        std::optional<double> declared;  // declared constant, when one was checked
        double max_violation = 0.0;      // max of LHS - RHS over checked points (<= tol on pass)
        std::vector<SpaceTimePoint> violations;
        std::size_t violation_count = 0;
        std::size_t points_checked = 0;
        std::size_t points_skipped = 0;
        std::size_t grid_resolution = 0;
        double moll_width = 0.0;
        std::vector<std::pair<std::string, double>> extras;
        std::vector<std::string> notes;
    };

    inline constexpr std::size_t kMaxRecordedViolations = 4096;

    struct TheoremConstants
    {
        double epsilon = 0.0;
        double K1 = 0.0;
        double K = 1.0;
        double T = 1.0;
        double delta = 0.5;
        double mu = 0.0;
        double nu = 0.0;
    };

    /// delta = 1/2 - eps/4, mu = (delta/2) exp(-T K1 / (2 delta)), nu = mu / (12 K T).
    /// Throws DomainConstraintError unless 0 <= eps < 2, K1 >= 0, K > 0, T > 0.
    TheoremConstants theorem_constants(double epsilon, double K1, double K, double T);

    /// Checks 2 D_t phi <= K1 phi on the cell-centre grid of `region`. Without a declared
    /// K1 the verdict is pass with the tightest K1 unless phi vanishes where D_t phi > 0.
    LyapunovCertificate check_drift_condition(const PotentialField &pot, const Region &region,
                                              std::size_t grid_resolution,
                                              std::optional<double> declared_K1 = std::nullopt);

    /// Checks 2 D_t phi + sum_ij d_j(a_ij d_i phi) <= h e^{eps phi} on the cell-centre grid,
    /// with the divergence taken by central differences of width moll_width. Points with
    /// boundary_distance < 2 moll_width are skipped; more than 10% skipped is inconclusive.
    /// Points where halving the width moves the LHS by more than 5% are treated as
    /// unresolved (non-smooth) and also make the verdict inconclusive.
    ///
    /// `h` and `epsilon` default to pot.lyapunov; a missing h is taken as h = 1, so
    /// `constant` is then the smallest C with LHS <= C e^{eps phi}.
    LyapunovCertificate check_elliptic_condition(const PotentialField &pot, const DiffusionField &diff,
                                                 const Region &region, std::size_t grid_resolution,
                                                 double moll_width, const SpaceTimeDomain *domain = nullptr,
                                                 std::optional<ScalarField> h = std::nullopt,
                                                 std::optional<double> epsilon = std::nullopt);

    /// max LHS e^{-eps phi} over the grid, i.e. the constant C for which h = C passes.
    double calibrate_h_constant(const PotentialField &pot, const DiffusionField &diff, const Region &region,
                                std::size_t grid_resolution, double moll_width, double epsilon,
                                const SpaceTimeDomain *domain = nullptr);

    /// Eigenvalues of sigma sigma^* on the closure node grid against declared (lower, upper) within 1e-9.
    LyapunovCertificate check_ellipticity(const DiffusionField &diff, const Region &region,
                                          std::size_t grid_resolution,
                                          std::optional<Ellipticity> declared = std::nullopt);

    /// Grid estimate of K in |a_ij(t,x) - a_ij(s,y)| <= K (|x-y| v |t-s|^{1/2}) over neighbouring nodes.
    LyapunovCertificate check_lipschitz_a(const DiffusionField &diff, const Region &region,
                                          std::size_t grid_resolution,
                                          std::optional<double> declared_K = std::nullopt);

    struct IntegralEstimate
    {
        double estimate = 0.0;
        double se = 0.0;
        std::size_t n_samples = 0;
        /// Standard error above half the estimate, or non-finite: likely divergent.
        bool flagged = false;
    };

    /// Monte Carlo estimate of int_Q h^r I_(0,T)(t) e^{-a|x|^2} dt dx with proposal
    /// U(0,T) x N(0, I/(2a)). Any r >= 1 is accepted; condition (H) itself uses r > 1.
    IntegralEstimate h_integral(const ScalarField &h, const SpaceTimeDomain &domain, double T, double a, double r,
                                std::size_t n_samples, std::uint64_t seed);

    /// Condition (H) certificate from h_integral: pass when the estimate is finite and
    /// not flagged, inconclusive otherwise. Requires r > 1.
    LyapunovCertificate check_condition_h(const ScalarField &h, const SpaceTimeDomain &domain, double T, double a,
                                          double r, std::size_t n_samples, std::uint64_t seed);

    struct MixedNorm
    {
        double value = 0.0;
        double S = 0.0;
        double T = 0.0;
        std::vector<double> lo;
        std::vector<double> hi;
        double p = 1.0;
        double q = 1.0;
        std::size_t grid_resolution = 0;
    };

    /// Midpoint approximation of (int_S^T (int_box |f|^p dx)^{q/p} dt)^{1/q}. p or q may be +inf.
    MixedNorm lp_lq_norm(const ScalarField &f, double S, double T, const std::vector<double> &lo,
                         const std::vector<double> &hi, double p, double q, std::size_t grid_resolution);
}
