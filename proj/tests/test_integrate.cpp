#include "domsde/integrate.hpp"
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

    PathRecord synthetic(std::initializer_list<double> xs, bool cemetery = false)
    {
        PathRecord rec;
        rec.dim = 1;
        rec.start = {0.0, vec({*xs.begin()})};
        double t = 0.0;
        for (double x : xs)
        {
            rec.times.push_back(t);
            rec.state_data.push_back(x);
            t += 0.1;
        }
        rec.horizon = 10.0;
        if (cemetery)
        {
            rec.status = PathStatus::exited;
            rec.xi = t;
        }
        return rec;
    }

    void check_path_invariants(const PathRecord &p, const SpaceTimeDomain &q, const StepPolicy &policy)
    {
        for (std::size_t k = 0; k < p.size(); ++k)
        {
            ASSERT_TRUE(q.contains({p.start.t + p.times[k], Vector(p.state(k))})) << k;
            if (k > 0)
            {
                const double dt = p.times[k] - p.times[k - 1];
                ASSERT_GT(dt, 0.0);
                ASSERT_LE(dt, policy.dt_max * (1 + 1e-12));
            }
        }
        if (p.cemetery())
        {
            ASSERT_TRUE(p.xi.has_value());
            ASSERT_LE(*p.xi, p.horizon);
            ASSERT_GT(*p.xi, p.times.back());
        }
        else
        {
            ASSERT_FALSE(p.xi.has_value());
        }
    }
}

TEST(StepSize, FarInteriorGivesMaximum)
{
    StepPolicy p;
    p.dt_max = 0.05;
    p.c1 = 1e12;
    p.c2 = 1e12;
    EXPECT_DOUBLE_EQ(step_size(p, 100.0, 0.0, 1.0), 0.05);
}

TEST(StepSize, BoundaryTermBinds)
{
    StepPolicy p;
    p.dt_max = 1e-2;
    p.dt_min = 1e-8;
    p.c1 = 1.0;
    p.c2 = 1e12;
    EXPECT_NEAR(step_size(p, 0.01, 0.0, 1.0), 1e-4, 1e-18);
}

TEST(StepSize, DriftTermBinds)
{
    StepPolicy p;
    p.dt_max = 1e-2;
    p.dt_min = 1e-8;
    p.c1 = 1e12;
    p.c2 = 1.0;
    EXPECT_NEAR(step_size(p, 100.0, 99.0, 1.0), 1.0 / 9802.0, 1e-16);
    p.dt_min = 1e-3;
    EXPECT_DOUBLE_EQ(step_size(p, 100.0, 99.0, 1.0), 1e-3);
}

TEST(StepSize, PointOverloadUsesCoefficients)
{
    const ModelSpec m = make_bessel_drift();
    StepPolicy p;
    p.c1 = 1.0;
    p.c2 = 1e12;
    EXPECT_NEAR(step_size(p, {0.0, vec({0.05})}, m.coeffs, *m.domain), 0.0025, 1e-15);
    EXPECT_THROW(step_size(p, {0.0, vec({-0.05})}, m.coeffs, *m.domain), PreconditionError);
}

TEST(Policy, Validation)
{
    StepPolicy p;
    p.dt_min = 1.0;
    p.dt_max = 0.1;
    EXPECT_THROW(p.validate(), ConfigError);
    EXPECT_NO_THROW(StepPolicy::fixed(1e-3).validate());
}

TEST(Simulate, BrownianIncrementsReproduceTheStream)
{
    const ModelSpec bm = make_brownian(2);
    // Dyadic step and horizon keep every grid time exact.
    const StepPolicy policy = StepPolicy::fixed(0.0625);
    SimulationOptions keep;
    keep.keep_increments = true;
    const PathRecord p = simulate_path(bm.coeffs, *bm.domain, {0.0, vec({0.0, 0.0})}, 1.0, policy, 5, 3, keep);
    ASSERT_EQ(p.size(), 17u);
    GaussianSource g(make_stream(5, 3, StreamTag::path));
    Vector x = Vector::Zero(2);
    for (std::size_t k = 0; k + 1 < p.size(); ++k)
    {
        Vector z(2);
        z << g(), g();
        const Vector dw = 0.25 * z;
        EXPECT_EQ(p.increment(k), dw);
        x += dw;
        EXPECT_EQ(Vector(p.state(k + 1)), x);
    }
}

TEST(Simulate, BrownianTerminalMeanIsZero)
{
    const ModelSpec bm = make_brownian(1);
    const auto paths = simulate_paths(bm.coeffs, *bm.domain, {0.0, vec({0.0})}, 1.0, StepPolicy::fixed(0.1), 1,
                                      10000, 1);
    double s = 0.0, s2 = 0.0;
    for (const auto &p : paths)
    {
        const double x = p.state(p.size() - 1)[0];
        s += x;
        s2 += x * x;
    }
    const double n = 10000.0, mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean), 3.0 * se);
}

TEST(Simulate, OrnsteinUhlenbeckMoments)
{
    const ModelSpec ou = make_ou(1);
    const auto paths =
        simulate_paths(ou.coeffs, *ou.domain, {0.0, vec({1.0})}, 1.0, StepPolicy::fixed(1e-2), 2, 10000, 1);
    std::vector<double> xs;
    for (const auto &p : paths)
        xs.push_back(p.state(p.size() - 1)[0]);
    double m = 0.0;
    for (double x : xs)
        m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0, m4 = 0.0;
    for (double x : xs)
    {
        v += (x - m) * (x - m);
        m4 += std::pow(x - m, 4);
    }
    const double n = static_cast<double>(xs.size());
    v /= n - 1;
    m4 /= n;
    const double se_m = std::sqrt(v / n), se_v = std::sqrt((m4 - v * v) / n);
    EXPECT_LT(std::abs(m - std::exp(-1.0)), 3 * se_m + 0.01);
    EXPECT_LT(std::abs(v - 0.5 * (1 - std::exp(-2.0))), 3 * se_v + 0.01);
}

TEST(Simulate, WeakOrderOne)
{
    // Euler on dX = -X dt from x0 = 10: E X_T = 10 (1 - dt)^{T/dt}, bias ratio ~ 2 between dt and dt/2.
    const ModelSpec ou = make_ou(1);
    const double exact = 10.0 * std::exp(-1.0);
    double bias[2];
    const double dts[2] = {0.1, 0.05};
    for (int i = 0; i < 2; ++i)
    {
        const auto paths = simulate_paths(ou.coeffs, *ou.domain, {0.0, vec({10.0})}, 1.0,
                                          StepPolicy::fixed(dts[i]), 77, 100000, 1);
        double s = 0.0;
        for (const auto &p : paths)
            s += p.state(p.size() - 1)[0];
        bias[i] = s / 100000.0 - exact;
    }
    const double ratio = bias[0] / bias[1];
    EXPECT_GE(ratio, 1.5);
    EXPECT_LE(ratio, 2.5);
}

TEST(Simulate, ExitSemanticsAndInvariants)
{
    const ModelSpec m = make_bessel_drift();
    StepPolicy policy;
    policy.dt_max = 1e-2;
    std::size_t exited = 0;
    for (std::uint64_t i = 0; i < 200; ++i)
    {
        const PathRecord p = simulate_path(m.coeffs, *m.domain, {0.0, vec({1.0})}, 4.0, policy, 9, i);
        check_path_invariants(p, *m.domain, policy);
        exited += p.cemetery();
        if (p.cemetery())
        {
            EXPECT_GT(p.counters.substeps, 0u);
        }
    }
    EXPECT_GT(exited, 180u);
}

TEST(Simulate, StartMustLieInQ)
{
    const ModelSpec m = make_bessel_drift();
    EXPECT_THROW(simulate_path(m.coeffs, *m.domain, {0.0, vec({0.0})}, 1.0, StepPolicy{}, 1, 0), PreconditionError);
    EXPECT_THROW(simulate_path(m.coeffs, *m.domain, {0.0, vec({1.0})}, 0.0, StepPolicy{}, 1, 0), PreconditionError);
}

TEST(Simulate, DeterministicAndWorkerIndependent)
{
    const ModelSpec m = make_example_62(0.5);
    StepPolicy policy;
    const auto a = simulate_paths(m.coeffs, *m.domain, {0.0, vec({1.0})}, 1.0, policy, 4, 40, 1);
    const auto b = simulate_paths(m.coeffs, *m.domain, {0.0, vec({1.0})}, 1.0, policy, 4, 40, 3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        EXPECT_EQ(a[i].times, b[i].times);
        EXPECT_EQ(a[i].state_data, b[i].state_data);
        EXPECT_EQ(a[i].xi, b[i].xi);
        EXPECT_EQ(a[i].status, b[i].status);
    }
}

TEST(Simulate, ClipCapMarksUnresolved)
{
    const auto coeffs = make_direct_coefficients(
        1, [](double, const Vector &) { return Vector::Constant(1, 1e9); }, sigma_constant(1, 1.0));
    const auto q = make_full_space(1);
    StepPolicy policy;
    policy.clip_cap = 10;
    const PathRecord p = simulate_path(coeffs, *q, {0.0, vec({0.0})}, 1.0, policy, 1, 0);
    EXPECT_EQ(p.status, PathStatus::unresolved);
    EXPECT_EQ(p.counters.drift_clips, 11u);
}

TEST(Simulate, SingularCoefficientKillsThePath)
{
    // The drift blows up (throws) once x leaves (-1, 1); the domain does not know.
    const auto coeffs = make_direct_coefficients(
        1,
        [](double t, const Vector &x) -> Vector {
            if (std::abs(x[0]) >= 0.2)
                throw SingularityError({t, x});
            return Vector::Zero(1);
        },
        sigma_constant(1, 1.0));
    const auto q = make_full_space(1);
    const PathRecord p = simulate_path(coeffs, *q, {0.0, vec({0.0})}, 10.0, StepPolicy{}, 3, 0);
    ASSERT_EQ(p.status, PathStatus::exited);
    EXPECT_GT(*p.xi, p.times.back());
    for (std::size_t k = 0; k < p.size(); ++k)
        EXPECT_LT(std::abs(p.state(k)[0]), 0.2);
}

TEST(Simulate, LocalizedPathsAgreeUntilLevelExit)
{
    const ModelSpec m = make_example_611();
    const int n = 3;
    const CoefficientSet loc = localize(m.coeffs, *m.domain, n, 0.0);
    const Region qn = m.domain->exhaustion_level(n);
    StepPolicy policy;
    policy.dt_max = 1e-2;
    std::size_t compared = 0, left = 0;
    for (std::uint64_t i = 0; i < 50; ++i)
    {
        const PathRecord a = simulate_path(m.coeffs, *m.domain, {0.0, vec({1.0})}, 2.0, policy, 21, i);
        const PathRecord b = simulate_path(loc, *m.domain, {0.0, vec({1.0})}, 2.0, policy, 21, i);
        const auto exit = level_exit_time(a, qn);
        left += exit.has_value();
        // States agree up to and including the first one computed from outside closure(Q^n).
        for (std::size_t k = 0; k < a.size(); ++k)
        {
            ASSERT_LT(k, b.size());
            ASSERT_EQ(a.times[k], b.times[k]);
            ASSERT_EQ(a.state(k)[0], b.state(k)[0]);
            ++compared;
            if (exit && a.times[k] >= *exit)
                break;
        }
    }
    EXPECT_GT(left, 0u);
    EXPECT_GT(compared, 50u * 20u);
}

TEST(Simulate, StartAtTimeZeroIsNotALevelExit)
{
    const ModelSpec m = make_bessel_drift();
    const PathRecord p = simulate_path(m.coeffs, *m.domain, {0.0, vec({1.0})}, 0.5, StepPolicy::fixed(0.01), 1, 0);
    for (int n = 2; n <= 6; ++n)
    {
        EXPECT_TRUE(m.domain->exhaustion_level(n).contains({0.0, vec({1.0})})) << n;
        const auto e = level_exit_time(p, m.domain->exhaustion_level(n));
        EXPECT_TRUE(!e || *e > 0.0) << n;
    }
}

TEST(Simulate, NestedLevelExitTimesAreOrdered)
{
    const ModelSpec m = make_bessel_drift();
    for (std::uint64_t i = 0; i < 50; ++i)
    {
        const PathRecord p = simulate_path(m.coeffs, *m.domain, {0.5, vec({1.0})}, 3.0, StepPolicy{}, 8, i);
        std::optional<double> prev;
        for (int n = 2; n <= 6; ++n)
        {
            const auto e = level_exit_time(p, m.domain->exhaustion_level(n));
            if (prev && e)
            {
                EXPECT_LE(*prev, *e);
            }
            if (e)
                prev = e;
        }
    }
}

TEST(RunCounter, InsideOnlyIsZero)
{
    const auto q = make_half_line();
    EXPECT_EQ(run_counter(synthetic({1.0, 1.1, 0.9, 1.0}), *q, 2), 0u);
}

TEST(RunCounter, SingleRun)
{
    const auto q = make_half_line();
    EXPECT_EQ(run_counter(synthetic({1.0, 2.5, 3.5}), *q, 2), 1u);
}

TEST(RunCounter, Sawtooth)
{
    const auto q = make_half_line();
    // Q^2 = {1/2 < x < 2}, Q^3 = {1/3 < x < 3}
    EXPECT_EQ(run_counter(synthetic({1.0, 3.5, 1.0, 3.5, 2.5}), *q, 2), 2u);
    // Leaving Q^2 without leaving Q^3 does not complete a run.
    EXPECT_EQ(run_counter(synthetic({1.0, 2.5, 1.0, 2.5}), *q, 2), 0u);
    // Starting outside closure(Q^2): the first excursion does not count until entry.
    EXPECT_EQ(run_counter(synthetic({2.5, 3.5, 2.5, 1.0, 3.5}), *q, 2), 1u);
}

TEST(RunCounter, CemeteryWhileArmedCounts)
{
    const auto q = make_half_line();
    EXPECT_EQ(run_counter(synthetic({1.0, 0.8}, true), *q, 2), 1u);
    EXPECT_EQ(run_counter(synthetic({1.0, 3.5, 2.5}, true), *q, 2), 1u);
}
