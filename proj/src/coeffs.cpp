#include "domsde/coeffs.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace domsde
{
    Matrix DiffusionField::a(double t, const Vector &x) const
    {
        const Matrix s = sigma(t, x);
        const Matrix prod = s * s.transpose();
        return 0.5 * (prod + prod.transpose());
    }

    double smoothstep(double u) noexcept
    {
        if (!(u > 0.0))
            return 0.0;
        if (u >= 1.0)
            return 1.0;
        return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
    }

    double default_fd_step(double clearance) noexcept
    {
        // Clearances beyond 10 are treated as 10 so the stencil stays local.
        const double c = std::isfinite(clearance) ? std::min(clearance, 10.0) : 10.0;
        return std::max(1e-5, 1e-4 * c);
    }

    VectorField finite_difference_gradient(ScalarField phi, double step)
    {
        return [phi = std::move(phi), step](double t, const Vector &x) {
            Vector g(x.size());
            Vector y = x;
            for (Eigen::Index k = 0; k < x.size(); ++k)
            {
                y[k] = x[k] + step;
                const double fp = phi(t, y);
                y[k] = x[k] - step;
                const double fm = phi(t, y);
                y[k] = x[k];
                g[k] = (fp - fm) / (2.0 * step);
            }
            return g;
        };
    }

    Vector divergence_correction(const DiffusionField &diff, const SpaceTimePoint &p, double fd_step,
                                 double clearance)
    {
        const auto d = static_cast<Eigen::Index>(diff.dim);
        if (p.x.size() != d)
            throw DimensionError(diff.dim, p.dim());
        Vector out = Vector::Zero(d);

        if (diff.has_jacobian())
        {
            // d_j a_ij = sum_l (d_j s_il s_jl + s_il d_j s_jl)
            const Matrix s = diff.sigma(p.t, p.x);
            const std::vector<Matrix> js = diff.jacobian(p.t, p.x);
            for (Eigen::Index i = 0; i < d; ++i)
            {
                double acc = 0.0;
                for (Eigen::Index j = 0; j < d; ++j)
                {
                    const Matrix &dj = js[static_cast<std::size_t>(j)];
                    for (Eigen::Index l = 0; l < d; ++l)
                        acc += dj(i, l) * s(j, l) + s(i, l) * dj(j, l);
                }
                out[i] = 0.5 * acc;
            }
            return out;
        }

        if (!(fd_step > 0.0))
            throw PreconditionError("fd_step must be positive");
        if (!(clearance > fd_step))
            throw StencilError(fd_step, clearance);

        Vector y = p.x;
        for (Eigen::Index j = 0; j < d; ++j)
        {
            y[j] = p.x[j] + fd_step;
            const Matrix ap = diff.a(p.t, y);
            y[j] = p.x[j] - fd_step;
            const Matrix am = diff.a(p.t, y);
            y[j] = p.x[j];
            for (Eigen::Index i = 0; i < d; ++i)
                out[i] += (ap(i, j) - am(i, j)) / (2.0 * fd_step);
        }
        return 0.5 * out;
    }

    Vector build_gradient_drift(const PotentialField &pot, const DiffusionField &diff, const SpaceTimePoint &p,
                                double fd_step, double clearance)
    {
        const Vector g = pot.grad_phi(p.t, p.x);
        if (!g.allFinite())
            throw SingularityError(p, "non-finite potential gradient");
        Vector b = -(diff.a(p.t, p.x) * g) + divergence_correction(diff, p, fd_step, clearance);
        if (!b.allFinite())
            throw SingularityError(p, "non-finite drift");
        return b;
    }

    CoefficientSet make_direct_coefficients(std::size_t dim, VectorField drift, DiffusionField diffusion)
    {
        if (diffusion.dim != dim)
            throw DimensionError(dim, diffusion.dim);
        CoefficientSet c;
        c.dim = dim;
        c.drift = std::move(drift);
        c.diffusion = std::move(diffusion);
        c.provenance = Provenance::direct;
        return c;
    }

    CoefficientSet make_gradient_coefficients(PotentialField pot, DiffusionField diffusion, DomainPtr domain,
                                              VectorField extra_drift)
    {
        if (!pot.grad_phi)
            throw ConfigError("gradient-type coefficients require grad_phi");
        if (domain && domain->dim() != diffusion.dim)
            throw DimensionError(domain->dim(), diffusion.dim);

        CoefficientSet c;
        c.dim = diffusion.dim;
        c.diffusion = diffusion;
        c.provenance = Provenance::gradient_type;
        c.potential = pot;
        c.extra_drift = extra_drift;
        c.drift = [pot, diffusion, domain, extra_drift](double t, const Vector &x) {
            const SpaceTimePoint p{t, x};
            Vector b;
            if (diffusion.has_jacobian() || !domain)
            {
                b = build_gradient_drift(pot, diffusion, p, default_fd_step(kInf));
            }
            else
            {
                const double clear = domain->clearance(p);
                if (!(clear > 0.0))
                    throw SingularityError(p, "drift evaluated outside the domain");
                double h = default_fd_step(clear);
                if (h >= clear)
                    h = 0.5 * clear;
                b = build_gradient_drift(pot, diffusion, p, h, clear);
            }
            if (extra_drift)
                b += extra_drift(t, x);
            return b;
        };
        return c;
    }

    double smooth_cutoff(const Region &inner, const Region &outer, const SpaceTimePoint &p)
    {
        const double outer_depth = outer.depth(p);
        if (!(outer_depth > 0.0))
            return 0.0;
        const double inner_depth = inner.depth(p);
        if (inner_depth >= 0.0)
            return 1.0;
        const double a = -inner_depth;
        const double b = outer_depth;
        const double u = a / (a + b);
        return 1.0 - smoothstep(u);
    }

    double sup_sigma_estimate(const DiffusionField &diff, const Region &region)
    {
        const std::size_t axes = region.dim() + 1;
        std::size_t budget = 1;
        for (std::size_t k = 0; k < std::min<std::size_t>(axes, 3); ++k)
            budget *= 32;
        std::size_t res = 32;
        if (axes > 3)
            res = std::max<std::size_t>(2, TensorGrid::resolution_for_budget(axes, budget));

        const TensorGrid grid(region.box(), res, false);
        double sup = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            const SpaceTimePoint q = grid.point(i);
            if (!region.contains_closure(q))
                continue;
            const double norm = diff.sigma(q.t, q.x).norm();
            if (std::isfinite(norm))
                sup = std::max(sup, norm);
        }
        return 1.05 * sup;
    }

    CoefficientSet localize(const CoefficientSet &coeffs, const SpaceTimeDomain &domain, int n, double shift)
    {
        if (n < 1)
            throw PreconditionError("localization level must be >= 1");
        if (domain.dim() != coeffs.dim)
            throw DimensionError(domain.dim(), coeffs.dim);

        const auto qn = std::make_shared<Region>(domain.exhaustion_level(n));
        const auto qn1 = std::make_shared<Region>(domain.exhaustion_level(n + 1));
        const auto qn2 = std::make_shared<Region>(domain.exhaustion_level(n + 2));
        const double c = 1.0 + sup_sigma_estimate(coeffs.diffusion, *qn2);
        const auto d = static_cast<Eigen::Index>(coeffs.dim);

        CoefficientSet out;
        out.dim = coeffs.dim;
        out.provenance = Provenance::direct;

        out.drift = [drift = coeffs.drift, qn, qn1, shift, d](double t, const Vector &x) -> Vector {
            const SpaceTimePoint p{t + shift, x};
            const double chi = smooth_cutoff(*qn, *qn1, p);
            if (chi == 0.0)
                return Vector::Zero(d);
            if (chi == 1.0)
                return drift(p.t, x);
            return chi * drift(p.t, x);
        };

        DiffusionField diff;
        diff.dim = coeffs.dim;
        diff.sigma = [sigma = coeffs.diffusion.sigma, qn, qn1, qn2, shift, c, d](double t, const Vector &x) -> Matrix {
            const SpaceTimePoint p{t + shift, x};
            const double chi_n = smooth_cutoff(*qn, *qn1, p);
            const double chi_n1 = smooth_cutoff(*qn1, *qn2, p);
            if (chi_n == 1.0 && chi_n1 == 1.0)
                return sigma(p.t, x);
            Matrix s = (1.0 - chi_n) * c * Matrix::Identity(d, d);
            if (chi_n1 > 0.0)
                s += chi_n1 * sigma(p.t, x);
            return s;
        };
        out.diffusion = std::move(diff);
        return out;
    }

    EigenRange ellipticity_bounds(const DiffusionField &diff, const Region &region, std::size_t grid_resolution)
    {
        const TensorGrid grid(region.box(), std::max<std::size_t>(grid_resolution, 2), false);
        EigenRange r;
        Eigen::SelfAdjointEigenSolver<Matrix> solver;
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            const SpaceTimePoint q = grid.point(i);
            if (!region.contains_closure(q))
                continue;
            solver.compute(diff.a(q.t, q.x), Eigen::EigenvaluesOnly);
            const Vector &ev = solver.eigenvalues();
            r.min = std::min(r.min, ev.minCoeff());
            r.max = std::max(r.max, ev.maxCoeff());
            ++r.points;
        }
        if (r.points == 0)
            throw EmptyRegionError("no grid point of resolution " + std::to_string(grid_resolution) +
                                   " lies in region " + region.label());
        return r;
    }

    double gershgorin_bound(const Matrix &a) noexcept
    {
        double best = 0.0;
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            best = std::max(best, a.row(i).cwiseAbs().sum());
        return best;
    }
}
