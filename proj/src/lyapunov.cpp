#include "domsde/lyapunov.hpp"

#include "domsde/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace domsde
{
    namespace
    {
        double relative_tol(double rhs) noexcept { return 1e-8 * (1.0 + std::abs(rhs)); }

        double time_derivative(const PotentialField &pot, double t, const Vector &x)
        {
            if (pot.dt_phi)
                return pot.dt_phi(t, x);
            const double h = std::min(1e-5 * (1.0 + std::abs(t)), 0.5 * t);
            if (!(h > 0.0))
                return (pot.phi(t + 1e-6, x) - pot.phi(t, x)) / 1e-6;
            return (pot.phi(t + h, x) - pot.phi(t - h, x)) / (2.0 * h);
        }

        void record_violation(LyapunovCertificate &cert, const SpaceTimePoint &p)
        {
            ++cert.violation_count;
            if (cert.violations.size() < kMaxRecordedViolations)
                cert.violations.push_back(p);
        }

        /// sum_j d_j (a grad phi)_j by central differences of width w.
        double flux_divergence(const PotentialField &pot, const DiffusionField &diff, double t, const Vector &x,
                               double w)
        {
            double div = 0.0;
            Vector y = x;
            for (Eigen::Index j = 0; j < x.size(); ++j)
            {
                y[j] = x[j] + w;
                const double fp = (diff.a(t, y) * pot.grad_phi(t, y))[j];
                y[j] = x[j] - w;
                const double fm = (diff.a(t, y) * pot.grad_phi(t, y))[j];
                y[j] = x[j];
                div += (fp - fm) / (2.0 * w);
            }
            return div;
        }
    }

    std::string to_string(Inequality id)
    {
        switch (id)
        {
        case Inequality::drift_condition:
            return "drift-condition";
        case Inequality::elliptic_condition:
            return "elliptic-condition";
        case Inequality::condition_h:
            return "condition-H";
        case Inequality::ellipticity:
            return "ellipticity";
        case Inequality::lipschitz_a:
            return "lipschitz-a";
        }
        return "unknown";
    }

    std::string to_string(Verdict v)
    {
        switch (v)
        {
        case Verdict::pass:
            return "pass";
        case Verdict::fail:
            return "fail";
        case Verdict::inconclusive:
            return "inconclusive";
        }
        return "unknown";
    }

    TheoremConstants theorem_constants(double epsilon, double K1, double K, double T)
    {
        if (!(epsilon >= 0.0 && epsilon < 2.0))
            throw DomainConstraintError("epsilon must lie in [0,2), got " + std::to_string(epsilon));
        if (!(K1 >= 0.0) || !std::isfinite(K1))
            throw DomainConstraintError("K1 must be a finite nonnegative number");
        if (!(K > 0.0) || !std::isfinite(K))
            throw DomainConstraintError("K must be a finite positive number");
        if (!(T > 0.0) || !std::isfinite(T))
            throw DomainConstraintError("T must be a finite positive number");

        TheoremConstants c;
        c.epsilon = epsilon;
        c.K1 = K1;
        c.K = K;
        c.T = T;
        c.delta = 0.5 - epsilon / 4.0;
        c.mu = (c.delta / 2.0) * std::exp(-T * K1 / (2.0 * c.delta));
        c.nu = c.mu / (12.0 * K * T);
        return c;
    }

    LyapunovCertificate check_drift_condition(const PotentialField &pot, const Region &region,
                                              std::size_t grid_resolution, std::optional<double> declared_K1)
    {
        LyapunovCertificate cert;
        cert.inequality = Inequality::drift_condition;
        cert.constant_name = "K1";
        cert.declared = declared_K1;
        cert.grid_resolution = grid_resolution;

        const TensorGrid grid(region.box(), grid_resolution, true);
        double tightest = 0.0;
        bool degenerate = false;

        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            const SpaceTimePoint p = grid.point(i);
            if (!region.contains(p))
                continue;
            const double phi = pot.phi(p.t, p.x);
            const double lhs = 2.0 * time_derivative(pot, p.t, p.x);
            if (!std::isfinite(phi) || !std::isfinite(lhs))
            {
                ++cert.points_skipped;
                continue;
            }
            ++cert.points_checked;
            if (phi > 0.0)
                tightest = std::max(tightest, lhs / phi);
            else if (lhs > relative_tol(0.0))
            {
                degenerate = true;
                record_violation(cert, p);
                cert.max_violation = std::max(cert.max_violation, lhs);
            }
            if (declared_K1 && phi > 0.0)
            {
                const double rhs = *declared_K1 * phi;
                const double slack = lhs - rhs;
                if (slack > relative_tol(rhs))
                {
                    record_violation(cert, p);
                    cert.max_violation = std::max(cert.max_violation, slack);
                }
            }
        }
        if (cert.points_checked == 0)
            throw EmptyRegionError("drift-condition grid has no point inside " + region.label());

        cert.constant = tightest;
        if (degenerate)
            cert.notes.push_back("phi vanishes at points where D_t phi > 0; no finite K1 exists");
        cert.verdict = cert.violation_count > 0 ? Verdict::fail : Verdict::pass;
        return cert;
    }

    namespace
    {
        struct EllipticScan
        {
            LyapunovCertificate cert;
            double max_scaled = -kInf; // max LHS e^{-eps phi} / h
            std::size_t unresolved = 0;
        };

        EllipticScan scan_elliptic(const PotentialField &pot, const DiffusionField &diff, const Region &region,
                                   std::size_t grid_resolution, double moll_width, const SpaceTimeDomain *domain,
                                   const ScalarField *h, double epsilon)
        {
            if (!(moll_width > 0.0))
                throw PreconditionError("moll_width must be positive");
            EllipticScan scan;
            LyapunovCertificate &cert = scan.cert;
            cert.inequality = Inequality::elliptic_condition;
            cert.constant_name = "C";
            cert.grid_resolution = grid_resolution;
            cert.moll_width = moll_width;

            const TensorGrid grid(region.box(), grid_resolution, true);
            std::size_t in_region = 0;
            for (std::size_t i = 0; i < grid.size(); ++i)
            {
                const SpaceTimePoint p = grid.point(i);
                if (!region.contains(p))
                    continue;
                ++in_region;
                if (domain && (!domain->contains(p) || domain->boundary_distance(p) < 2.0 * moll_width))
                {
                    ++cert.points_skipped;
                    continue;
                }
                const double phi = pot.phi(p.t, p.x);
                const double dt = 2.0 * time_derivative(pot, p.t, p.x);
                const double lhs = dt + flux_divergence(pot, diff, p.t, p.x, moll_width);
                const double lhs_half = dt + flux_divergence(pot, diff, p.t, p.x, 0.5 * moll_width);
                const double hv = h ? (*h)(p.t, p.x) : 1.0;
                if (!std::isfinite(phi) || !std::isfinite(lhs) || !std::isfinite(lhs_half) || !std::isfinite(hv))
                {
                    ++cert.points_skipped;
                    continue;
                }
                ++cert.points_checked;
                if (std::abs(lhs - lhs_half) > 0.05 * (1.0 + std::abs(lhs)))
                    ++scan.unresolved;

                const double weight = std::exp(-epsilon * phi);
                const double scaled = lhs * weight;
                if (hv > 0.0)
                    scan.max_scaled = std::max(scan.max_scaled, scaled / hv);
                else if (scaled > 0.0)
                    scan.max_scaled = kInf;
                else
                    scan.max_scaled = std::max(scan.max_scaled, 0.0);

                const double rhs = hv * std::exp(epsilon * phi);
                const double slack = lhs - rhs;
                cert.max_violation = cert.points_checked == 1 ? slack : std::max(cert.max_violation, slack);
                if (slack > relative_tol(rhs))
                    record_violation(cert, p);
            }
            if (in_region == 0)
                throw EmptyRegionError("elliptic-condition grid has no point inside " + region.label());
            return scan;
        }
    }

    LyapunovCertificate check_elliptic_condition(const PotentialField &pot, const DiffusionField &diff,
                                                 const Region &region, std::size_t grid_resolution,
                                                 double moll_width, const SpaceTimeDomain *domain,
                                                 std::optional<ScalarField> h, std::optional<double> epsilon)
    {
        ScalarField hfield;
        if (h)
            hfield = *h;
        else if (pot.lyapunov && pot.lyapunov->h)
            hfield = pot.lyapunov->h;
        double eps = 0.0;
        if (epsilon)
            eps = *epsilon;
        else if (pot.lyapunov)
            eps = pot.lyapunov->epsilon;
        if (!(eps >= 0.0 && eps < 2.0))
            throw DomainConstraintError("epsilon must lie in [0,2), got " + std::to_string(eps));

        EllipticScan scan = scan_elliptic(pot, diff, region, grid_resolution, moll_width, domain,
                                          hfield ? &hfield : nullptr, eps);
        LyapunovCertificate cert = std::move(scan.cert);
        cert.constant = scan.max_scaled;
        cert.extras.emplace_back("epsilon", eps);
        cert.extras.emplace_back("unresolved_points", static_cast<double>(scan.unresolved));

        const std::size_t seen = cert.points_checked + cert.points_skipped;
        const bool too_many_skipped = seen > 0 && 10 * cert.points_skipped > seen;
        if (cert.points_checked == 0 || too_many_skipped)
        {
            std::ostringstream os;
            os << cert.points_skipped << " of " << seen << " grid points skipped";
            if (cert.violation_count > 0)
                os << "; " << cert.violation_count << " violations among the remaining points not certified";
            cert.notes.push_back(os.str());
            cert.violations.clear();
            cert.violation_count = 0;
            cert.verdict = Verdict::inconclusive;
        }
        else if (cert.violation_count > 0)
        {
            cert.verdict = Verdict::fail;
        }
        else if (scan.unresolved > 0)
        {
            cert.notes.push_back(std::to_string(scan.unresolved) +
                                 " points change by more than 5% when the stencil width is halved; "
                                 "second derivatives look distributional there");
            cert.verdict = Verdict::inconclusive;
        }
        else
        {
            cert.verdict = Verdict::pass;
        }
        return cert;
    }

    double calibrate_h_constant(const PotentialField &pot, const DiffusionField &diff, const Region &region,
                                std::size_t grid_resolution, double moll_width, double epsilon,
                                const SpaceTimeDomain *domain)
    {
        const EllipticScan scan =
            scan_elliptic(pot, diff, region, grid_resolution, moll_width, domain, nullptr, epsilon);
        return std::max(0.0, scan.max_scaled);
    }

    LyapunovCertificate check_ellipticity(const DiffusionField &diff, const Region &region,
                                          std::size_t grid_resolution, std::optional<Ellipticity> declared)
    {
        LyapunovCertificate cert;
        cert.inequality = Inequality::ellipticity;
        cert.constant_name = "K";
        cert.grid_resolution = grid_resolution;
        if (!declared)
            declared = diff.declared;

        const TensorGrid grid(region.box(), std::max<std::size_t>(grid_resolution, 2), false);
        Eigen::SelfAdjointEigenSolver<Matrix> solver;
        double lo = kInf, hi = -kInf;
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            const SpaceTimePoint p = grid.point(i);
            if (!region.contains_closure(p))
                continue;
            solver.compute(diff.a(p.t, p.x), Eigen::EigenvaluesOnly);
            const double emin = solver.eigenvalues().minCoeff();
            const double emax = solver.eigenvalues().maxCoeff();
            ++cert.points_checked;
            lo = std::min(lo, emin);
            hi = std::max(hi, emax);
            if (declared)
            {
                const double slack = std::max(declared->lower - emin, emax - declared->upper);
                if (slack > 1e-9)
                {
                    record_violation(cert, p);
                    cert.max_violation = std::max(cert.max_violation, slack);
                }
            }
        }
        if (cert.points_checked == 0)
            throw EmptyRegionError("ellipticity grid has no point inside " + region.label());

        cert.constant = lo > 0.0 ? std::max(hi, 1.0 / lo) : kInf;
        cert.extras.emplace_back("min_eigenvalue", lo);
        cert.extras.emplace_back("max_eigenvalue", hi);
        if (declared)
        {
            cert.extras.emplace_back("declared_lower", declared->lower);
            cert.extras.emplace_back("declared_upper", declared->upper);
        }
        if (cert.violation_count > 0)
            cert.verdict = Verdict::fail;
        else if (lo > 0.0)
            cert.verdict = Verdict::pass;
        else
        {
            cert.notes.push_back("sigma sigma^* is singular on the grid");
            cert.verdict = Verdict::inconclusive;
        }
        return cert;
    }

    LyapunovCertificate check_lipschitz_a(const DiffusionField &diff, const Region &region,
                                          std::size_t grid_resolution, std::optional<double> declared_K)
    {
        LyapunovCertificate cert;
        cert.inequality = Inequality::lipschitz_a;
        cert.constant_name = "K";
        cert.declared = declared_K;
        const std::size_t res = std::max<std::size_t>(grid_resolution, 2);
        cert.grid_resolution = res;

        const TensorGrid grid(region.box(), res, false);
        std::vector<Matrix> values(grid.size());
        std::vector<char> inside(grid.size(), 0);
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            const SpaceTimePoint p = grid.point(i);
            if (!region.contains_closure(p))
                continue;
            values[i] = diff.a(p.t, p.x);
            inside[i] = values[i].allFinite() ? 1 : 0;
        }

        const std::size_t axes = region.dim() + 1;
        double best = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            if (!inside[i])
                continue;
            std::size_t stride = 1;
            std::size_t rest = i;
            for (std::size_t axis = 0; axis < axes; ++axis)
            {
                const std::size_t k = rest % res;
                rest /= res;
                const std::size_t j = i + stride;
                stride *= res;
                if (k + 1 >= res || !inside[j])
                    continue;
                const double h = grid.spacing(axis);
                const double scale = axis == 0 ? std::sqrt(h) : h;
                const double diffmax = (values[j] - values[i]).cwiseAbs().maxCoeff();
                const double ratio = diffmax / scale;
                ++cert.points_checked;
                best = std::max(best, ratio);
                if (declared_K && diffmax > *declared_K * scale + 1e-12)
                {
                    record_violation(cert, grid.point(i));
                    cert.max_violation = std::max(cert.max_violation, diffmax - *declared_K * scale);
                }
            }
        }
        if (cert.points_checked == 0)
            throw EmptyRegionError("lipschitz grid has no adjacent node pair inside " + region.label());
        cert.constant = best;
        cert.verdict = cert.violation_count > 0 ? Verdict::fail : Verdict::pass;
        cert.notes.push_back("grid-sampled estimate over neighbouring nodes, not a bound");
        return cert;
    }

    IntegralEstimate h_integral(const ScalarField &h, const SpaceTimeDomain &domain, double T, double a, double r,
                                std::size_t n_samples, std::uint64_t seed)
    {
        if (!(T > 0.0) || !(a > 0.0) || !(r >= 1.0) || n_samples < 2)
            throw PreconditionError("h_integral requires T > 0, a > 0, r >= 1 and at least two samples");
        const std::size_t d = domain.dim();
        const double scale = T * std::pow(M_PI / a, 0.5 * static_cast<double>(d));
        const double sd = std::sqrt(1.0 / (2.0 * a));

        GaussianSource gauss(make_stream(seed, 0, StreamTag::quadrature));
        double mean = 0.0, m2 = 0.0;
        SpaceTimePoint p;
        p.x.resize(static_cast<Eigen::Index>(d));
        for (std::size_t k = 0; k < n_samples; ++k)
        {
            p.t = T * gauss.uniform();
            for (std::size_t i = 0; i < d; ++i)
                p.x[static_cast<Eigen::Index>(i)] = sd * gauss();
            double w = 0.0;
            if (domain.contains(p))
            {
                const double hv = h(p.t, p.x);
                w = hv == 0.0 ? 0.0 : scale * std::pow(hv, r);
            }
            const double delta = w - mean;
            mean += delta / static_cast<double>(k + 1);
            m2 += delta * (w - mean);
        }
        IntegralEstimate out;
        out.n_samples = n_samples;
        out.estimate = mean;
        const double var = m2 / static_cast<double>(n_samples - 1);
        out.se = std::sqrt(var / static_cast<double>(n_samples));
        out.flagged = !std::isfinite(out.estimate) || !std::isfinite(out.se) || out.se > 0.5 * std::abs(out.estimate);
        return out;
    }

    LyapunovCertificate check_condition_h(const ScalarField &h, const SpaceTimeDomain &domain, double T, double a,
                                          double r, std::size_t n_samples, std::uint64_t seed)
    {
        if (!(r > 1.0))
            throw PreconditionError("condition (H) needs an exponent r > 1");
        const IntegralEstimate est = h_integral(h, domain, T, a, r, n_samples, seed);
        LyapunovCertificate cert;
        cert.inequality = Inequality::condition_h;
        cert.constant_name = "H";
        cert.constant = est.estimate;
        cert.points_checked = est.n_samples;
        cert.extras = {{"se", est.se}, {"T", T}, {"a", a}, {"r", r}};
        if (est.flagged)
        {
            cert.notes.push_back("standard error is large relative to the estimate; the integral may diverge");
            cert.verdict = Verdict::inconclusive;
        }
        else
        {
            cert.verdict = Verdict::pass;
        }
        return cert;
    }

    MixedNorm lp_lq_norm(const ScalarField &f, double S, double T, const std::vector<double> &lo,
                         const std::vector<double> &hi, double p, double q, std::size_t grid_resolution)
    {
        if (!(S < T))
            throw PreconditionError("lp_lq_norm requires S < T");
        if (!(p >= 1.0) || !(q >= 1.0))
            throw PreconditionError("lp_lq_norm requires p, q >= 1");
        if (lo.size() != hi.size())
            throw DimensionError(lo.size(), hi.size());
        const std::size_t d = lo.size();
        const std::size_t res = std::max<std::size_t>(grid_resolution, 1);

        std::vector<double> step(d);
        double cell = 1.0;
        for (std::size_t i = 0; i < d; ++i)
        {
            if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
                throw PreconditionError("lp_lq_norm requires a finite non-empty box");
            step[i] = (hi[i] - lo[i]) / static_cast<double>(res);
            cell *= step[i];
        }
        std::size_t n_space = 1;
        for (std::size_t i = 0; i < d; ++i)
            n_space *= res;
        const double dt = (T - S) / static_cast<double>(res);

        const bool p_inf = std::isinf(p);
        const bool q_inf = std::isinf(q);
        double outer = 0.0;
        Vector x(static_cast<Eigen::Index>(d));
        for (std::size_t it = 0; it < res; ++it)
        {
            const double t = S + (static_cast<double>(it) + 0.5) * dt;
            double inner = 0.0;
            for (std::size_t is = 0; is < n_space; ++is)
            {
                std::size_t rest = is;
                for (std::size_t i = 0; i < d; ++i)
                {
                    const std::size_t k = rest % res;
                    rest /= res;
                    x[static_cast<Eigen::Index>(i)] = lo[i] + (static_cast<double>(k) + 0.5) * step[i];
                }
                const double v = std::abs(f(t, x));
                if (p_inf)
                    inner = std::max(inner, v);
                else
                    inner += std::pow(v, p);
            }
            const double space_norm = p_inf ? inner : std::pow(inner * cell, 1.0 / p);
            if (q_inf)
                outer = std::max(outer, space_norm);
            else
                outer += std::pow(space_norm, q) * dt;
        }

        MixedNorm out;
        out.value = q_inf ? outer : std::pow(outer, 1.0 / q);
        out.S = S;
        out.T = T;
        out.lo = lo;
        out.hi = hi;
        out.p = p;
        out.q = q;
        out.grid_resolution = res;
        return out;
    }
}
