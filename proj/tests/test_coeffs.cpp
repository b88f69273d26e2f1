#include "domsde/coeffs.hpp"
#include "domsde/models.hpp"
#include "domsde/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace domsde;

namespace
{
    Vector vec(std::initializer_list<double> v)
    {
        Vector out(static_cast<Eigen::Index>(v.size()));
        Eigen::Index i = 0;
        for (double x : v)
            out[i++] = x;
        return out;
    }

    /// sigma = diag(1 + x_1^2, 1), d = 2, without an analytic jacobian.
    DiffusionField stretched_no_jacobian()
    {
        DiffusionField d;
        d.dim = 2;
        d.sigma = [](double, const Vector &x) {
            Matrix s = Matrix::Identity(2, 2);
            s(0, 0) = 1.0 + x[0] * x[0];
            return s;
        };
        return d;
    }

    DiffusionField without_jacobian(DiffusionField d)
    {
        d.jacobian = nullptr;
        return d;
    }

    Region ball_region(double radius)
    {
        BoundingBox box;
        box.t_lo = 0.0;
        box.t_hi = 1.0;
        box.lo = {-radius};
        box.hi = {radius};
        return Region(1, box, {[radius](const SpaceTimePoint &p) { return radius - p.x.norm(); }}, "ball");
    }
}

TEST(Smoothstep, ProfileValues)
{
    EXPECT_DOUBLE_EQ(smoothstep(0.0), 0.0);
    EXPECT_DOUBLE_EQ(smoothstep(1.0), 1.0);
    EXPECT_DOUBLE_EQ(smoothstep(0.5), 0.5);
    EXPECT_DOUBLE_EQ(smoothstep(-3.0), 0.0);
    EXPECT_DOUBLE_EQ(smoothstep(7.0), 1.0);
    for (double u : {0.1, 0.2, 0.37})
        EXPECT_NEAR(smoothstep(u) + smoothstep(1.0 - u), 1.0, 1e-15);
}

TEST(FdStep, DefaultRule)
{
    EXPECT_DOUBLE_EQ(default_fd_step(1.0), 1e-4);
    EXPECT_DOUBLE_EQ(default_fd_step(1e-3), 1e-5);
    EXPECT_DOUBLE_EQ(default_fd_step(kInf), 1e-3);
}

TEST(Divergence, ConstantSigmaGivesZero)
{
    const auto d = sigma_constant(3, 2.5);
    const SpaceTimePoint p{0.3, vec({1.0, -2.0, 0.5})};
    EXPECT_TRUE(divergence_correction(d, p, 1e-4).isZero(0.0));
    EXPECT_LT(divergence_correction(without_jacobian(d), p, 1e-4).norm(), 1e-9);
}

TEST(Divergence, SineSigmaAtOrigin)
{
    const SpaceTimePoint p{0.0, vec({0.0})};
    EXPECT_DOUBLE_EQ(divergence_correction(sigma_sine(1), p, 1e-4)[0], 2.0);
    EXPECT_NEAR(divergence_correction(without_jacobian(sigma_sine(1)), p, 1e-4)[0], 2.0, 1e-7);
}

TEST(Divergence, FiniteDifferenceMatchesAnalyticOracle)
{
    const SpaceTimePoint p{0.0, vec({1.0, 0.0})};
    const Vector got = divergence_correction(stretched_no_jacobian(), p, 1e-4);
    // (1/2) d_1 (1 + x_1^2)^2 = 2 x_1 (1 + x_1^2)
    EXPECT_NEAR(got[0], 4.0, 1e-7);
    EXPECT_NEAR(got[1], 0.0, 1e-12);
}

TEST(Divergence, FiniteDifferenceErrorIsSecondOrder)
{
    const auto check = [](const DiffusionField &fd, const Vector &x, double exact) {
        const SpaceTimePoint p{0.0, x};
        const double e1 = std::abs(divergence_correction(fd, p, 2e-2)[0] - exact);
        const double e2 = std::abs(divergence_correction(fd, p, 1e-2)[0] - exact);
        const double ratio = e1 / e2;
        EXPECT_GE(ratio, 3.5);
        EXPECT_LE(ratio, 4.5);
    };
    check(stretched_no_jacobian(), vec({1.0, 0.0}), 4.0);
    const double x = 0.7;
    check(without_jacobian(sigma_sine(1)), vec({x}), (2.0 + std::sin(x)) * std::cos(x));
}

TEST(Divergence, StencilMustFitInsideDomain)
{
    const auto d = without_jacobian(sigma_sine(1));
    const SpaceTimePoint p{0.0, vec({0.5})};
    try
    {
        divergence_correction(d, p, 1e-3, 5e-4);
        FAIL() << "expected StencilError";
    }
    catch (const StencilError &e)
    {
        EXPECT_DOUBLE_EQ(e.required_clearance, 1e-3);
        EXPECT_DOUBLE_EQ(e.available_clearance, 5e-4);
    }
    EXPECT_NO_THROW(divergence_correction(sigma_sine(1), p, 1e-3, 5e-4)); // analytic path has no stencil
}

TEST(GradientDrift, QuadraticPotentialIdentityDiffusion)
{
    PotentialField pot;
    pot.phi = [](double, const Vector &x) { return 0.5 * x.squaredNorm(); };
    pot.grad_phi = [](double, const Vector &x) { return x; };
    const Vector b = build_gradient_drift(pot, sigma_constant(2, 1.0), {0.0, vec({3.0, -1.0})}, 1e-4);
    EXPECT_DOUBLE_EQ(b[0], -3.0);
    EXPECT_DOUBLE_EQ(b[1], 1.0);
}

TEST(GradientDrift, SingularPowerLawWithSineDiffusion)
{
    const ModelSpec m = make_example_62(0.5);
    const double s = 2.0 + std::sin(1.0);
    const double expected = (0.5 - 1.0) * s * s + s * std::cos(1.0);
    const Vector b = build_gradient_drift(m.potential(), m.coeffs.diffusion, {0.0, vec({1.0})}, 1e-4);
    EXPECT_NEAR(b[0], expected, 1e-12);
    EXPECT_NEAR(m.coeffs.drift(0.0, vec({1.0}))[0], expected, 1e-12);
}

TEST(GradientDrift, DecomposesIntoFluxAndCorrection)
{
    PotentialField pot;
    pot.phi = [](double t, const Vector &x) { return (1.0 + t) * x.squaredNorm() + x[0]; };
    pot.grad_phi = [](double t, const Vector &x) {
        Vector g = 2.0 * (1.0 + t) * x;
        g[0] += 1.0;
        return g;
    };
    const DiffusionField diff = sigma_sine(3);
    GaussianSource g(make_stream(1, 0, StreamTag::sampling));
    for (int i = 0; i < 100; ++i)
    {
        const SpaceTimePoint p{g.uniform(), vec({3 * g(), 3 * g(), 3 * g()})};
        const Vector b = build_gradient_drift(pot, diff, p, 1e-4);
        const Vector ref = -diff.a(p.t, p.x) * pot.grad_phi(p.t, p.x) + divergence_correction(diff, p, 1e-4);
        EXPECT_LT((b - ref).cwiseAbs().maxCoeff(), 1e-12);
        const Matrix a = diff.a(p.t, p.x);
        EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(GradientDrift, NonFiniteGradientRaisesSingularity)
{
    PotentialField pot;
    pot.phi = [](double, const Vector &x) { return 1.0 / x.norm(); };
    pot.grad_phi = [](double, const Vector &x) { return Vector(-x / std::pow(x.norm(), 3)); };
    const SpaceTimePoint p{0.25, vec({0.0})};
    try
    {
        build_gradient_drift(pot, sigma_constant(1, 1.0), p, 1e-4);
        FAIL() << "expected SingularityError";
    }
    catch (const SingularityError &e)
    {
        EXPECT_DOUBLE_EQ(e.point.t, 0.25);
        EXPECT_DOUBLE_EQ(e.point.x[0], 0.0);
    }
}

TEST(GradientDrift, SingularityGuardAtTheOrigin)
{
    const ModelSpec m = make_example_62(0.5);
    EXPECT_THROW(m.potential().grad_phi(0.0, vec({1e-13})), SingularityError);
}

TEST(SmoothCutoff, InsideOutsideAndMidpoint)
{
    const Region inner = ball_region(1.0), outer = ball_region(2.0);
    EXPECT_DOUBLE_EQ(smooth_cutoff(inner, outer, {0.5, vec({0.3})}), 1.0);
    EXPECT_DOUBLE_EQ(smooth_cutoff(inner, outer, {0.5, vec({1.0})}), 1.0); // closure of inner
    EXPECT_DOUBLE_EQ(smooth_cutoff(inner, outer, {0.5, vec({2.5})}), 0.0);
    EXPECT_DOUBLE_EQ(smooth_cutoff(inner, outer, {0.5, vec({-1.5})}), 0.5);
    const double c = smooth_cutoff(inner, outer, {0.5, vec({1.25})});
    EXPECT_GT(c, 0.5);
    EXPECT_LT(c, 1.0);
}

TEST(Localize, ExactOnInnerLevel)
{
    const ModelSpec m = make_example_611();
    const int n = 2;
    const double shift = 0.0;
    const CoefficientSet loc = localize(m.coeffs, *m.domain, n, shift);
    const Region qn = m.domain->exhaustion_level(n);
    GaussianSource g(make_stream(8, 0, StreamTag::sampling));
    int checked = 0;
    while (checked < 1000)
    {
        const SpaceTimePoint p{2.0 * g.uniform(), vec({0.5 + 1.5 * g.uniform()})};
        if (!qn.contains(p))
            continue;
        ++checked;
        const Vector b0 = m.coeffs.drift(p.t, p.x), b1 = loc.drift(p.t, p.x);
        const Matrix s0 = m.coeffs.diffusion.sigma(p.t, p.x), s1 = loc.diffusion.sigma(p.t, p.x);
        ASSERT_EQ(b0[0], b1[0]);
        ASSERT_EQ(s0(0, 0), s1(0, 0));
    }
}

TEST(Localize, OuterValuesFollowCutoffFormula)
{
    const ModelSpec m = make_example_611();
    const int n = 2;
    const CoefficientSet loc = localize(m.coeffs, *m.domain, n, 0.0);
    const double c = 1.0 + sup_sigma_estimate(m.coeffs.diffusion, m.domain->exhaustion_level(n + 2));
    // Outside Q^{n+1} the drift vanishes.
    for (double x : {0.2, 0.3, 3.5, 10.0, -1.0})
        EXPECT_EQ(loc.drift(1.0, vec({x}))[0], 0.0) << x;
    // Outside Q^{n+2} the diffusion is the constant c I.
    for (double x : {0.1, 5.0, -1.0})
        EXPECT_DOUBLE_EQ(loc.diffusion.sigma(1.0, vec({x}))(0, 0), c) << x;
    // Between Q^{n+1} and Q^{n+2}: c I + chi_{n+1} sigma (chi_n = 0 there).
    const Region q3 = m.domain->exhaustion_level(3), q4 = m.domain->exhaustion_level(4);
    const SpaceTimePoint p{1.0, vec({0.3})};
    ASSERT_FALSE(q3.contains(p));
    const double chi = smooth_cutoff(q3, q4, p);
    EXPECT_GT(chi, 0.0);
    EXPECT_NEAR(loc.diffusion.sigma(1.0, p.x)(0, 0), c + chi / (1.0 + 0.09), 1e-15);
}

TEST(Localize, TransitionScalesDriftByCutoff)
{
    Vector normal(1);
    normal << 1.0;
    const auto slab = make_slab(normal, -4.0, 4.0);
    const auto coeffs = make_direct_coefficients(
        1, [](double t, const Vector &x) { return Vector::Constant(1, 1.0 + t + x[0]); }, sigma_constant(1, 1.0));
    const int n = 2;
    const double shift = 0.25;
    const CoefficientSet loc = localize(coeffs, *slab, n, shift);
    const Region qn = slab->exhaustion_level(n), qn1 = slab->exhaustion_level(n + 1);
    // A point between the two levels, found by scanning outward in x.
    SpaceTimePoint mid{1.0, vec({0.0})};
    for (double x = 0.0; x < 4.0; x += 1e-3)
    {
        mid.x[0] = x;
        const SpaceTimePoint shifted{1.0 + shift, mid.x};
        if (!qn.contains_closure(shifted) && qn1.contains(shifted))
            break;
    }
    const SpaceTimePoint shifted{mid.t + shift, mid.x};
    const double chi = smooth_cutoff(qn, qn1, shifted);
    ASSERT_GT(chi, 0.0);
    ASSERT_LT(chi, 1.0);
    const double expected = chi * (1.0 + shifted.t + mid.x[0]);
    EXPECT_DOUBLE_EQ(loc.drift(mid.t, mid.x)[0], expected);
}

TEST(Ellipticity, IdentityGivesUnitBounds)
{
    const auto r = ellipticity_bounds(sigma_constant(2, 1.0), make_full_space(2)->exhaustion_level(2), 8);
    EXPECT_DOUBLE_EQ(r.min, 1.0);
    EXPECT_DOUBLE_EQ(r.max, 1.0);
    EXPECT_GT(r.points, 0u);
}

TEST(Ellipticity, InverseSquareOnLevelTwo)
{
    const ModelSpec m = make_example_611();
    const auto r = ellipticity_bounds(m.coeffs.diffusion, m.domain->exhaustion_level(2), 33);
    EXPECT_NEAR(r.min, 0.04, 1e-12);
    EXPECT_NEAR(r.max, 0.64, 1e-12);
}

TEST(Ellipticity, SineWithinDeclaredRange)
{
    const auto r = ellipticity_bounds(sigma_sine(1), make_full_space(1)->exhaustion_level(6), 64);
    EXPECT_GE(r.min, 1.0 - 1e-12);
    EXPECT_LE(r.max, 9.0 + 1e-12);
    EXPECT_LE(r.min, r.max);
}

TEST(Ellipticity, EmptyRegionThrows)
{
    BoundingBox box;
    box.t_lo = 0.0;
    box.t_hi = 1.0;
    box.lo = {0.0};
    box.hi = {1.0};
    const Region empty(1, box, {[](const SpaceTimePoint &) { return -1.0; }}, "empty");
    EXPECT_THROW(ellipticity_bounds(sigma_constant(1, 1.0), empty, 8), EmptyRegionError);
}

TEST(Gershgorin, BoundsLargestEigenvalue)
{
    Matrix a(2, 2);
    a << 2.0, -1.0, -1.0, 3.0;
    EXPECT_DOUBLE_EQ(gershgorin_bound(a), 4.0);
}
