#pragma once

#include "domsde/domain.hpp"
#include "domsde/region.hpp"
#include "domsde/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace domsde
{
    using ScalarField = std::function<double(double t, const Vector &x)>;
    using VectorField = std::function<Vector(double t, const Vector &x)>;
    using MatrixField = std::function<Matrix(double t, const Vector &x)>;
    /// jacobian(t, x)[k](i, j) = d sigma_ij / d x_k
    using JacobianField = std::function<std::vector<Matrix>(double t, const Vector &x)>;

    /// Declared bounds lower * |l|^2 <= |sigma^* l|^2 <= upper * |l|^2.
    struct Ellipticity
    {
        double lower = 0.0;
        double upper = kInf;
    };

    struct DiffusionField
    {
        std::size_t dim = 0;
        MatrixField sigma;
        JacobianField jacobian; // empty when no analytic derivative is available
        std::optional<Ellipticity> declared;

        bool has_jacobian() const noexcept { return static_cast<bool>(jacobian); }
        /// a = sigma sigma^*
        Matrix a(double t, const Vector &x) const;
    };

    /// Data for the Lyapunov inequalities 2 D_t phi <= K1 phi and
    /// 2 D_t phi + div(a grad phi) <= h exp(epsilon phi).
    struct LyapunovData
    {
        ScalarField h;
        double epsilon = 0.0;
        double K1 = 0.0;
    };

    struct PotentialField
    {
        ScalarField phi;
        VectorField grad_phi;
        ScalarField dt_phi; // empty: central difference in t
        bool analytic_gradient = true;
        std::optional<LyapunovData> lyapunov;
    };

    enum class Provenance
    {
        direct,
        gradient_type
    };

    /// Drift b, diffusion sigma and, for gradient-type sets, the potential phi
    /// from which b was assembled.
    struct CoefficientSet
    {
        std::size_t dim = 0;
        VectorField drift;
        DiffusionField diffusion;
        Provenance provenance = Provenance::direct;
        std::optional<PotentialField> potential;
        /// Additional drift folded into `drift` (bounded perturbation of a gradient-type drift).
        VectorField extra_drift;
    };

    /// Smoothstep profile 6u^5 - 15u^4 + 10u^3 on [0,1], clamped outside.
    double smoothstep(double u) noexcept;

    /// Default stencil h = max(1e-5, 1e-4 * clearance).
    double default_fd_step(double clearance) noexcept;

    /// Central-difference gradient of a scalar field with fixed step.
    VectorField finite_difference_gradient(ScalarField phi, double step);

    /// (1/2) sum_j d_j a_ij at p. Uses the analytic jacobian when present, otherwise
    /// central differences of a with step fd_step; throws StencilError when
    /// clearance <= fd_step in that case.
    Vector divergence_correction(const DiffusionField &diff, const SpaceTimePoint &p, double fd_step,
                                 double clearance = kInf);

    /// -(a grad phi)(p) + (1/2) sum_j d_j a_ij(p). Throws SingularityError on a
    /// non-finite gradient.
    Vector build_gradient_drift(const PotentialField &pot, const DiffusionField &diff, const SpaceTimePoint &p,
                                double fd_step, double clearance = kInf);

    CoefficientSet make_direct_coefficients(std::size_t dim, VectorField drift, DiffusionField diffusion);

    /// Gradient-type coefficient set. When the diffusion has no analytic jacobian the
    /// divergence term uses default_fd_step on the domain clearance, halved near the boundary.
    CoefficientSet make_gradient_coefficients(PotentialField pot, DiffusionField diffusion, DomainPtr domain,
                                              VectorField extra_drift = {});

    /// Cutoff equal to 1 on the closure of `inner`, 0 outside `outer`, with the
    /// smoothstep profile in the normalised coordinate u = a / (a + b), where a is the
    /// distance outside inner and b the depth inside outer. Requires closure(inner) in outer.
    double smooth_cutoff(const Region &inner, const Region &outer, const SpaceTimePoint &p);

    /// max Frobenius norm of sigma over a node grid (at most 32^min(d+1,3) points)
    /// of the region's closure, times 1.05.
    double sup_sigma_estimate(const DiffusionField &diff, const Region &region);

    /// Globally defined coefficients agreeing with `coeffs` on Q^n:
    ///   b^n(t,x)     = chi_n(t+s,x) b(t+s,x)
    ///   sigma^n(t,x) = chi_{n+1}(t+s,x) sigma(t+s,x) + (1 - chi_n(t+s,x)) (1 + sup_{Q^{n+2}}|sigma|) I
    CoefficientSet localize(const CoefficientSet &coeffs, const SpaceTimeDomain &domain, int n, double shift);

    struct EigenRange
    {
        double min = kInf;
        double max = -kInf;
        std::size_t points = 0;
    };

    /// Extreme eigenvalues of sigma sigma^* over the node grid restricted to closure(region).
    /// Throws EmptyRegionError when no grid node lies in the region.
    EigenRange ellipticity_bounds(const DiffusionField &diff, const Region &region, std::size_t grid_resolution);

    /// Gershgorin bound on the largest eigenvalue of a symmetric PSD matrix.
    double gershgorin_bound(const Matrix &a) noexcept;
}
