#include "domsde/lyapunov.hpp"
#include "domsde/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace domsde;

namespace
{
    Region box_region(std::size_t dim, double t_lo, double t_hi, double lo, double hi)
    {
        BoundingBox box;
        box.t_lo = t_lo;
        box.t_hi = t_hi;
        box.lo.assign(dim, lo);
        box.hi.assign(dim, hi);
        return Region(dim, box, {}, "box");
    }

    PotentialField quadratic(double scale)
    {
        PotentialField pot;
        pot.phi = [scale](double, const Vector &x) { return scale * x.squaredNorm(); };
        pot.grad_phi = [scale](double, const Vector &x) { return Vector(2.0 * scale * x); };
        pot.dt_phi = [](double, const Vector &) { return 0.0; };
        return pot;
    }

    ScalarField constant(double c)
    {
        return [c](double, const Vector &) { return c; };
    }
}

TEST(Constants, ReferenceValues)
{
    auto k = theorem_constants(0.0, 0.0, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(k.delta, 0.5);
    EXPECT_DOUBLE_EQ(k.mu, 0.25);
    EXPECT_NEAR(k.nu, 0.25 / 12.0, 1e-15);
    k = theorem_constants(1.0, 2.0, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(k.delta, 0.25);
    EXPECT_NEAR(k.mu, 0.125 * std::exp(-4.0), 1e-15);
    EXPECT_NEAR(k.mu, 0.0022894548610917723, 1e-15);
    EXPECT_NEAR(k.nu, k.mu / 12.0, 1e-18);
    k = theorem_constants(1.5, 0.0, 2.0, 2.0);
    EXPECT_DOUBLE_EQ(k.delta, 0.125);
    EXPECT_DOUBLE_EQ(k.mu, 0.0625);
    EXPECT_NEAR(k.nu, 0.0625 / 48.0, 1e-15);
}

TEST(Constants, RejectsEpsilonOutsideRange)
{
    try
    {
        theorem_constants(2.0, 0.0, 1.0, 1.0);
        FAIL() << "expected DomainConstraintError";
    }
    catch (const DomainConstraintError &e)
    {
        EXPECT_NE(std::string(e.what()).find("[0,2)"), std::string::npos);
    }
    EXPECT_THROW(theorem_constants(-0.1, 0.0, 1.0, 1.0), DomainConstraintError);
    EXPECT_THROW(theorem_constants(0.5, -1.0, 1.0, 1.0), DomainConstraintError);
    EXPECT_THROW(theorem_constants(0.5, 0.0, 0.0, 1.0), DomainConstraintError);
}

TEST(Constants, MonotoneInParameters)
{
    for (double eps : {0.0, 0.5, 1.0, 1.9})
    {
        double prev_mu = kInf;
        for (double K1 : {0.0, 0.5, 1.0, 4.0})
        {
            const double mu = theorem_constants(eps, K1, 1.0, 1.0).mu;
            EXPECT_LE(mu, prev_mu);
            prev_mu = mu;
        }
        prev_mu = kInf;
        for (double T : {0.1, 1.0, 3.0})
        {
            const double mu = theorem_constants(eps, 1.0, 1.0, T).mu;
            EXPECT_LE(mu, prev_mu);
            prev_mu = mu;
        }
        double prev_nu = kInf;
        for (double K : {0.5, 1.0, 9.0})
        {
            const double nu = theorem_constants(eps, 1.0, K, 1.0).nu;
            EXPECT_LE(nu, prev_nu);
            prev_nu = nu;
        }
    }
}

TEST(DriftCondition, TimeIndependentPotentialPassesWithZero)
{
    const auto c = check_drift_condition(quadratic(1.0), box_region(1, 0.0, 1.0, -1.0, 1.0), 16);
    EXPECT_EQ(c.verdict, Verdict::pass);
    EXPECT_DOUBLE_EQ(c.constant, 0.0);
    EXPECT_TRUE(c.violations.empty());
}

TEST(DriftCondition, ExponentialGrowthNeedsTwo)
{
    PotentialField pot;
    pot.phi = [](double t, const Vector &x) { return std::exp(t) * (1.0 + x.squaredNorm()); };
    pot.grad_phi = [](double t, const Vector &x) { return Vector(2.0 * std::exp(t) * x); };
    const Region r = box_region(1, 0.0, 1.0, -1.0, 1.0);
    auto c = check_drift_condition(pot, r, 16); // central difference in t
    EXPECT_EQ(c.verdict, Verdict::pass);
    EXPECT_NEAR(c.constant, 2.0, 1e-6);
    c = check_drift_condition(pot, r, 16, 2.0);
    EXPECT_EQ(c.verdict, Verdict::pass);
    c = check_drift_condition(pot, r, 16, 1.5);
    EXPECT_EQ(c.verdict, Verdict::fail);
    EXPECT_EQ(c.violation_count, c.points_checked);
}

TEST(DriftCondition, LinearInTimeReportsTwoOverSmallestTime)
{
    PotentialField pot;
    pot.phi = [](double t, const Vector &x) { return t * x.squaredNorm(); };
    pot.grad_phi = [](double t, const Vector &x) { return Vector(2.0 * t * x); };
    pot.dt_phi = [](double, const Vector &x) { return x.squaredNorm(); };
    const std::size_t res = 20;
    const Region r = box_region(1, 0.0, 0.1, 0.5, 1.0);
    // cell-centre grid: smallest time node is 0.1 / (2 res)
    const double t_min = 0.1 / (2.0 * res);
    const auto c = check_drift_condition(pot, r, res, 19.0);
    EXPECT_EQ(c.verdict, Verdict::fail);
    EXPECT_NEAR(c.constant, 2.0 / t_min, 1e-9 * (2.0 / t_min));
    EXPECT_FALSE(c.violations.empty());
}

TEST(EllipticCondition, QuadraticLaplacianAtZeroSlack)
{
    const Region r = box_region(2, 0.0, 1.0, -1.0, 1.0);
    const auto pass = check_elliptic_condition(quadratic(1.0), sigma_constant(2, 1.0), r, 12, 0.01, nullptr,
                                               constant(4.0), 0.0);
    EXPECT_EQ(pass.verdict, Verdict::pass);
    EXPECT_NEAR(pass.constant, 1.0, 1e-6); // LHS / (h e^{eps phi}) at its worst point
    EXPECT_NEAR(calibrate_h_constant(quadratic(1.0), sigma_constant(2, 1.0), r, 12, 0.01, 0.0), 4.0, 1e-6);
    EXPECT_TRUE(pass.violations.empty());
    const auto fail = check_elliptic_condition(quadratic(1.0), sigma_constant(2, 1.0), r, 12, 0.01, nullptr,
                                               constant(1.0), 0.0);
    EXPECT_EQ(fail.verdict, Verdict::fail);
    EXPECT_EQ(fail.violation_count, fail.points_checked);
    EXPECT_NEAR(fail.max_violation, 3.0, 1e-6);
}

TEST(EllipticCondition, StableUnderHalvingWidth)
{
    const ModelSpec m = make_example_62(0.5);
    const Region q2 = m.domain->exhaustion_level(2);
    const double c1 = calibrate_h_constant(m.potential(), m.coeffs.diffusion, q2, 40, 0.02, 1.5, m.domain.get());
    const double c2 = calibrate_h_constant(m.potential(), m.coeffs.diffusion, q2, 40, 0.01, 1.5, m.domain.get());
    EXPECT_LT(std::abs(c1 - c2), 0.05 * std::abs(c2));
    const auto a = check_elliptic_condition(m.potential(), m.coeffs.diffusion, q2, 40, 0.02, m.domain.get(),
                                            constant(c1), 1.5);
    const auto b = check_elliptic_condition(m.potential(), m.coeffs.diffusion, q2, 40, 0.01, m.domain.get(),
                                            constant(c1), 1.5);
    EXPECT_EQ(a.verdict, Verdict::pass);
    EXPECT_EQ(b.verdict == Verdict::fail ? Verdict::pass : b.verdict, Verdict::pass);
}

TEST(EllipticCondition, KinkIsInconclusive)
{
    // phi = |x| has a measure-valued second derivative at 0.
    PotentialField pot;
    pot.phi = [](double, const Vector &x) { return x.norm(); };
    pot.grad_phi = [](double, const Vector &x) { return Vector(x / std::max(x.norm(), 1e-300)); };
    pot.dt_phi = [](double, const Vector &) { return 0.0; };
    const auto c = check_elliptic_condition(pot, sigma_constant(1, 1.0), box_region(1, 0.0, 1.0, -1.0, 1.0), 21,
                                            0.05, nullptr, constant(100.0), 0.0);
    EXPECT_EQ(c.verdict, Verdict::inconclusive);
}

TEST(EllipticCondition, TooManySkippedPointsIsInconclusive)
{
    const auto half = make_half_line();
    const Region r = box_region(1, 0.0, 1.0, 0.0, 1.0);
    const auto c = check_elliptic_condition(quadratic(1.0), sigma_constant(1, 1.0), r, 10, 0.2, half.get(),
                                            constant(10.0), 0.0);
    EXPECT_EQ(c.verdict, Verdict::inconclusive);
    EXPECT_GT(c.points_skipped, c.points_checked / 10);
}

TEST(Ellipticity, DeclaredBoundsChecked)
{
    const Region r = make_full_space(1)->exhaustion_level(4);
    const auto ok = check_ellipticity(sigma_sine(1), r, 64, Ellipticity{1.0, 9.0});
    EXPECT_EQ(ok.verdict, Verdict::pass);
    const auto bad = check_ellipticity(sigma_sine(1), r, 64, Ellipticity{1.5, 9.0});
    EXPECT_EQ(bad.verdict, Verdict::fail);
}

TEST(LipschitzA, ConstantDiffusionHasZeroConstant)
{
    const auto c = check_lipschitz_a(sigma_constant(2, 3.0), make_full_space(2)->exhaustion_level(2), 8);
    EXPECT_EQ(c.verdict, Verdict::pass);
    EXPECT_NEAR(c.constant, 0.0, 1e-12);
    const auto s = check_lipschitz_a(sigma_sine(1), make_full_space(1)->exhaustion_level(3), 64);
    EXPECT_GT(s.constant, 0.0);
    EXPECT_LE(s.constant, 6.0 + 1e-9); // |d/dx (2 + sin x)^2| <= 6
}

TEST(HIntegral, ZeroFieldIsExactlyZero)
{
    const auto r = h_integral(constant(0.0), *make_full_space(1), 1.0, 1.0, 2.0, 1000, 1);
    EXPECT_EQ(r.estimate, 0.0);
    EXPECT_EQ(r.se, 0.0);
}

TEST(HIntegral, GaussianIntegral)
{
    const auto r = h_integral(constant(1.0), *make_full_space(1), 1.0, 1.0, 2.0, 20000, 7);
    EXPECT_NEAR(r.estimate, std::sqrt(M_PI), 1e-12); // zero-variance proposal for constant h
    EXPECT_FALSE(r.flagged);
}

TEST(HIntegral, AbsoluteValueOracle)
{
    // int_0^1 int |x| e^{-x^2} dx dt = 1
    const auto r = h_integral([](double, const Vector &x) { return x.norm(); }, *make_full_space(1), 1.0, 1.0, 1.0,
                              40000, 3);
    EXPECT_LT(std::abs(r.estimate - 1.0), 3.0 * r.se);
    EXPECT_GT(r.se, 0.0);
}

TEST(HIntegral, StandardErrorScalesAsInverseRoot)
{
    const ScalarField h = [](double, const Vector &x) { return x.norm(); };
    const auto a = h_integral(h, *make_full_space(1), 1.0, 1.0, 1.0, 10000, 11);
    const auto b = h_integral(h, *make_full_space(1), 1.0, 1.0, 1.0, 40000, 11);
    const double ratio = a.se / b.se;
    EXPECT_GT(ratio, 1.0);
    EXPECT_LT(ratio, 4.0);
}

TEST(HIntegral, ConditionCertificate)
{
    const auto c = check_condition_h(constant(1.0), *make_full_space(1), 1.0, 1.0, 2.0, 1000, 1);
    EXPECT_EQ(c.verdict, Verdict::pass);
    EXPECT_EQ(c.inequality, Inequality::condition_h);
}

TEST(MixedNorm, ConstantOnUnitSquare)
{
    for (double p : {1.0, 2.0, 4.0, kInf})
        for (double q : {1.0, 3.0, kInf})
        {
            EXPECT_NEAR(lp_lq_norm(constant(1.0), 0.0, 1.0, {0.0}, {1.0}, p, q, 16).value, 1.0, 1e-12);
            EXPECT_NEAR(lp_lq_norm(constant(2.5), 0.0, 1.0, {0.0}, {1.0}, p, q, 16).value, 2.5, 1e-12);
        }
}

TEST(MixedNorm, LinearFieldAnalyticValue)
{
    const auto n = lp_lq_norm([](double, const Vector &x) { return x[0]; }, 0.0, 1.0, {0.0}, {1.0}, 2.0, 2.0, 512);
    EXPECT_NEAR(n.value, 1.0 / std::sqrt(3.0), 1e-3);
    EXPECT_EQ(n.lo, std::vector<double>{0.0});
    EXPECT_EQ(n.hi, std::vector<double>{1.0});
}

TEST(MixedNorm, HomogeneousAndMonotone)
{
    const ScalarField f = [](double t, const Vector &x) { return std::sin(3 * x[0]) + t * x[1]; };
    const double base = lp_lq_norm(f, 0.0, 2.0, {-1.0, -1.0}, {1.0, 1.0}, 3.0, 2.0, 24).value;
    for (double c : {-3.0, 0.5, 7.0})
    {
        const ScalarField g = [f, c](double t, const Vector &x) { return c * f(t, x); };
        const double v = lp_lq_norm(g, 0.0, 2.0, {-1.0, -1.0}, {1.0, 1.0}, 3.0, 2.0, 24).value;
        EXPECT_NEAR(v, std::abs(c) * base, 1e-12 * std::abs(c) * base);
    }
    const ScalarField bigger = [f](double t, const Vector &x) { return std::abs(f(t, x)) + 0.1; };
    EXPECT_GE(lp_lq_norm(bigger, 0.0, 2.0, {-1.0, -1.0}, {1.0, 1.0}, 3.0, 2.0, 24).value, base);
}
