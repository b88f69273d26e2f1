#include "domsde/domain.hpp"

#include "domsde/rng.hpp"

#include <algorithm>
#include <cmath>

namespace domsde
{
    // --- SpaceTimeDomain -------------------------------------------------------

    void SpaceTimeDomain::check_dim(const SpaceTimePoint &p) const
    {
        if (p.dim() != dim())
            throw DimensionError(dim(), p.dim());
    }

    bool SpaceTimeDomain::contains(const SpaceTimePoint &p) const
    {
        check_dim(p);
        if (!(p.t >= 0.0))
            throw PreconditionError("space-time points require t >= 0, got " + describe(p));
        if (!p.x.allFinite())
            return false;
        return contains_impl(p);
    }

    Region SpaceTimeDomain::exhaustion_level(int n) const
    {
        if (n < 1)
            throw PreconditionError("exhaustion levels start at n = 1");
        return level_impl(n);
    }

    double SpaceTimeDomain::boundary_distance(const SpaceTimePoint &p) const
    {
        if (!contains(p))
            throw PreconditionError("boundary_distance requires a point of Q, got " + describe(p));
        return std::max(0.0, distance_impl(p));
    }

    std::optional<int> which_level(const SpaceTimeDomain &domain, const SpaceTimePoint &p, int n_max)
    {
        if (!domain.contains(p))
            throw PreconditionError("which_level requires a point of Q, got " + describe(p));
        for (int n = 1; n <= n_max; ++n)
        {
            if (domain.exhaustion_level(n).contains(p))
                return n;
        }
        return std::nullopt;
    }

    // --- CompactifiedState -----------------------------------------------------

    CompactifiedState CompactifiedState::at(SpaceTimePoint p)
    {
        CompactifiedState s;
        s.point_ = std::move(p);
        return s;
    }

    const SpaceTimePoint &CompactifiedState::point() const
    {
        if (!point_)
            throw PreconditionError("the cemetery state has no coordinates");
        return *point_;
    }

    CompactifiedState CompactifiedState::advance(const SpaceTimeDomain &domain, SpaceTimePoint candidate) const
    {
        if (is_cemetery() || !domain.contains(candidate))
            return cemetery();
        return at(std::move(candidate));
    }

    // --- ConstraintDomain ------------------------------------------------------

    ConstraintDomain::ConstraintDomain(std::string name, std::size_t dim, std::vector<SpatialConstraint> constraints,
                                       LevelBound bound, double t_max)
        : name_(std::move(name)), dim_(dim), constraints_(std::move(constraints)), bound_(bound), t_max_(t_max)
    {
        if (dim_ == 0)
            throw ConfigError("domain dimension must be positive");
        if (!(t_max_ > 0.0))
            throw ConfigError("domain time limit must be positive");
    }

    double ConstraintDomain::spatial_depth(const Vector &x) const
    {
        double d = kInf;
        for (const auto &c : constraints_)
        {
            const double g = c.g(x);
            if (std::isnan(g))
                return -kInf;
            d = std::min(d, g);
        }
        return d;
    }

    bool ConstraintDomain::contains_impl(const SpaceTimePoint &p) const
    {
        return p.t < t_max_ && spatial_depth(p.x) > 0.0;
    }

    double ConstraintDomain::distance_impl(const SpaceTimePoint &p) const
    {
        return std::min({p.t, t_max_ - p.t, spatial_depth(p.x)});
    }

    double ConstraintDomain::clearance(const SpaceTimePoint &p) const
    {
        check_dim(p);
        return std::min(t_max_ - p.t, spatial_depth(p.x));
    }

    Region ConstraintDomain::level_impl(int n) const
    {
        const double radius = static_cast<double>(n);
        const double margin = 1.0 / radius;
        const double t_hi = std::min(radius, t_max_ - margin);

        BoundingBox box;
        box.t_lo = 0.0;
        box.t_hi = t_hi;
        box.lo.assign(dim_, -radius);
        box.hi.assign(dim_, radius);
        for (const auto &c : constraints_)
        {
            if (c.lo.empty())
                continue;
            for (std::size_t i = 0; i < dim_; ++i)
            {
                box.lo[i] = std::max(box.lo[i], c.lo[i] + margin);
                box.hi[i] = std::min(box.hi[i], c.hi[i] - margin);
            }
        }

        std::vector<DepthFn> depth;
        // Q lives in R_+ x R^d, so t = 0 is not a boundary face: the level is [0, t_hi) in time and
        // its closure [0, t_hi] still lies inside the next level.
        depth.push_back([t_hi](const SpaceTimePoint &p) { return p.t < 0.0 ? p.t : t_hi - p.t; });
        if (bound_ == LevelBound::ball)
        {
            depth.push_back([radius](const SpaceTimePoint &p) { return radius - p.x.norm(); });
        }
        else
        {
            depth.push_back([radius](const SpaceTimePoint &p) { return radius - p.x.lpNorm<Eigen::Infinity>(); });
        }
        for (const auto &c : constraints_)
        {
            depth.push_back([g = c.g, margin](const SpaceTimePoint &p) { return g(p.x) - margin; });
        }
        return Region(dim_, std::move(box), std::move(depth), name_ + "^" + std::to_string(n));
    }

    // --- PredicateDomain -------------------------------------------------------

    namespace
    {
        constexpr int kProbeSamples = 64;
        constexpr int kBisections = 48;
        constexpr int kRandomRays = 16;
    }

    struct PredicateDomain::Prober
    {
        std::size_t dim;
        Predicate predicate;
        double radius;
        std::vector<Vector> rays;         // unit vectors in R^{d+1}
        std::vector<Vector> spatial_rays; // rays that do not go back in time

        bool inside(double t, const Vector &x) const { return t >= 0.0 && predicate(t, x); }

        double ray(const SpaceTimePoint &p, const Vector &dir) const
        {
            auto inside_at = [&](double r) {
                return inside(p.t + r * dir[0], p.x + r * dir.tail(static_cast<Eigen::Index>(dim)));
            };
            double prev = 0.0;
            for (int k = 1; k <= kProbeSamples; ++k)
            {
                const double u = static_cast<double>(k) / kProbeSamples;
                const double r = radius * u * u;
                if (!inside_at(r))
                {
                    double lo = prev;
                    double hi = r;
                    for (int b = 0; b < kBisections; ++b)
                    {
                        const double mid = 0.5 * (lo + hi);
                        (inside_at(mid) ? lo : hi) = mid;
                    }
                    return lo;
                }
                prev = r;
            }
            return radius;
        }

        double probe(const SpaceTimePoint &p, bool spatial_only) const
        {
            double d = radius;
            for (const auto &r : spatial_only ? spatial_rays : rays)
                d = std::min(d, ray(p, r));
            return d;
        }
    };

    PredicateDomain::PredicateDomain(std::string name, std::size_t dim, Predicate predicate, double probe_radius)
        : name_(std::move(name)), dim_(dim)
    {
        if (dim_ == 0)
            throw ConfigError("domain dimension must be positive");
        if (!(probe_radius > 0.0))
            throw ConfigError("probe radius must be positive");
        auto prober = std::make_shared<Prober>();
        prober->dim = dim_;
        prober->predicate = std::move(predicate);
        prober->radius = probe_radius;
        const auto axes = static_cast<Eigen::Index>(dim_ + 1);
        for (Eigen::Index a = 0; a < axes; ++a)
        {
            for (double sign : {1.0, -1.0})
            {
                Vector e = Vector::Zero(axes);
                e[a] = sign;
                prober->rays.push_back(e);
            }
        }
        GaussianSource gauss(make_stream(0x5EEDF00DULL, dim_, StreamTag::probe));
        for (int r = 0; r < kRandomRays; ++r)
        {
            Vector v(axes);
            for (Eigen::Index a = 0; a < axes; ++a)
                v[a] = gauss();
            prober->rays.push_back(v.normalized());
        }
        for (const auto &r : prober->rays)
        {
            if (r[0] >= 0.0)
                prober->spatial_rays.push_back(r);
        }
        prober_ = std::move(prober);
    }

    bool PredicateDomain::contains_impl(const SpaceTimePoint &p) const
    {
        return prober_->inside(p.t, p.x);
    }

    double PredicateDomain::distance_impl(const SpaceTimePoint &p) const
    {
        return prober_->probe(p, false);
    }

    double PredicateDomain::clearance(const SpaceTimePoint &p) const
    {
        check_dim(p);
        if (!prober_->inside(p.t, p.x))
            return 0.0;
        return prober_->probe(p, true);
    }

    Region PredicateDomain::level_impl(int n) const
    {
        const double radius = static_cast<double>(n);
        const double margin = 1.0 / radius;
        BoundingBox box;
        box.t_lo = margin;
        box.t_hi = radius;
        box.lo.assign(dim_, -radius);
        box.hi.assign(dim_, radius);
        std::vector<DepthFn> depth;
        depth.push_back([margin, radius](const SpaceTimePoint &p) { return std::min(p.t - margin, radius - p.t); });
        depth.push_back([radius](const SpaceTimePoint &p) { return radius - p.x.norm(); });
        depth.push_back([prober = prober_, margin](const SpaceTimePoint &p) {
            if (!prober->inside(p.t, p.x))
                return -margin;
            return prober->probe(p, false) - margin;
        });
        return Region(dim_, std::move(box), std::move(depth), name_ + "^" + std::to_string(n));
    }

    // --- Builtins --------------------------------------------------------------

    namespace
    {
        std::vector<double> fill(std::size_t d, double v) { return std::vector<double>(d, v); }

        SpatialConstraint halfspace_constraint(const Vector &normal, double offset)
        {
            const double norm = normal.norm();
            if (!(norm > 0.0))
                throw ConfigError("halfspace normal must be non-zero");
            SpatialConstraint c;
            c.g = [n = Vector(normal / norm), off = offset / norm](const Vector &x) { return n.dot(x) - off; };
            c.label = "halfspace";
            // Axis-aligned normals give a one-sided axis extent.
            Eigen::Index nz = -1;
            int count = 0;
            for (Eigen::Index i = 0; i < normal.size(); ++i)
            {
                if (normal[i] != 0.0)
                {
                    nz = i;
                    ++count;
                }
            }
            if (count == 1)
            {
                const std::size_t d = static_cast<std::size_t>(normal.size());
                c.lo = fill(d, -kInf);
                c.hi = fill(d, kInf);
                const double bound = offset / normal[nz];
                if (normal[nz] > 0.0)
                    c.lo[static_cast<std::size_t>(nz)] = bound;
                else
                    c.hi[static_cast<std::size_t>(nz)] = bound;
            }
            return c;
        }
    }

    DomainPtr make_full_space(std::size_t dim, double t_max)
    {
        return std::make_shared<ConstraintDomain>("full-space", dim, std::vector<SpatialConstraint>{},
                                                  LevelBound::ball, t_max);
    }

    DomainPtr make_halfspace(const Vector &normal, double offset, double t_max)
    {
        const auto d = static_cast<std::size_t>(normal.size());
        return std::make_shared<ConstraintDomain>("halfspace", d,
                                                  std::vector<SpatialConstraint>{halfspace_constraint(normal, offset)},
                                                  LevelBound::ball, t_max);
    }

    DomainPtr make_half_line()
    {
        return std::make_shared<ConstraintDomain>("half-line", 1,
                                                  std::vector<SpatialConstraint>{halfspace_constraint(Vector::Ones(1), 0.0)},
                                                  LevelBound::ball);
    }

    DomainPtr make_box(const std::vector<double> &lo, const std::vector<double> &hi, double t_max)
    {
        if (lo.size() != hi.size() || lo.empty())
            throw ConfigError("box bounds must be non-empty and of equal length");
        std::vector<SpatialConstraint> cs;
        const std::size_t d = lo.size();
        for (std::size_t i = 0; i < d; ++i)
        {
            if (!(lo[i] < hi[i]))
                throw ConfigError("box requires lo < hi on every axis");
            SpatialConstraint c;
            const auto ii = static_cast<Eigen::Index>(i);
            c.g = [ii, a = lo[i], b = hi[i]](const Vector &x) { return std::min(x[ii] - a, b - x[ii]); };
            c.label = "box-axis-" + std::to_string(i);
            c.lo = fill(d, -kInf);
            c.hi = fill(d, kInf);
            c.lo[i] = lo[i];
            c.hi[i] = hi[i];
            cs.push_back(std::move(c));
        }
        return std::make_shared<ConstraintDomain>("box", d, std::move(cs), LevelBound::ball, t_max);
    }

    DomainPtr make_slab(const Vector &normal, double lo, double hi, double t_max)
    {
        if (!(lo < hi))
            throw ConfigError("slab requires lo < hi");
        const double norm = normal.norm();
        if (!(norm > 0.0))
            throw ConfigError("slab normal must be non-zero");
        SpatialConstraint c;
        c.g = [n = Vector(normal / norm), a = lo / norm, b = hi / norm](const Vector &x) {
            const double s = n.dot(x);
            return std::min(s - a, b - s);
        };
        c.label = "slab";
        const auto d = static_cast<std::size_t>(normal.size());
        int count = 0;
        Eigen::Index nz = -1;
        for (Eigen::Index i = 0; i < normal.size(); ++i)
        {
            if (normal[i] != 0.0)
            {
                ++count;
                nz = i;
            }
        }
        if (count == 1)
        {
            c.lo = fill(d, -kInf);
            c.hi = fill(d, kInf);
            const double a = lo / normal[nz];
            const double b = hi / normal[nz];
            c.lo[static_cast<std::size_t>(nz)] = std::min(a, b);
            c.hi[static_cast<std::size_t>(nz)] = std::max(a, b);
        }
        return std::make_shared<ConstraintDomain>("slab", d, std::vector<SpatialConstraint>{std::move(c)},
                                                  LevelBound::ball, t_max);
    }

    DomainPtr make_punctured(std::size_t dim, std::size_t axis, double value, double t_max)
    {
        if (axis >= dim)
            throw ConfigError("punctured-plane axis out of range");
        SpatialConstraint c;
        const auto a = static_cast<Eigen::Index>(axis);
        c.g = [a, value](const Vector &x) { return std::abs(x[a] - value); };
        c.label = "punctured";
        return std::make_shared<ConstraintDomain>("punctured-plane", dim, std::vector<SpatialConstraint>{std::move(c)},
                                                  LevelBound::cube, t_max);
    }

    DomainPtr make_point_exclusion(std::size_t dim, std::vector<Vector> points, double rho, double t_max)
    {
        if (rho < 0.0)
            throw ConfigError("exclusion radius must be non-negative");
        for (const auto &y : points)
        {
            if (static_cast<std::size_t>(y.size()) != dim)
                throw DimensionError(dim, static_cast<std::size_t>(y.size()));
        }
        std::vector<SpatialConstraint> cs;
        if (!points.empty())
        {
            SpatialConstraint c;
            c.g = [pts = std::move(points), rho](const Vector &x) {
                double best = kInf;
                for (const auto &y : pts)
                    best = std::min(best, (x - y).squaredNorm());
                return std::sqrt(best) - rho;
            };
            c.label = "point-exclusion";
            cs.push_back(std::move(c));
        }
        return std::make_shared<ConstraintDomain>("point-exclusion", dim, std::move(cs), LevelBound::ball, t_max);
    }

    DomainPtr make_collision_free(std::size_t particles, std::size_t dim, double t_max)
    {
        if (particles < 2)
            throw ConfigError("collision-free domain needs at least two particles");
        SpatialConstraint c;
        const auto m = static_cast<Eigen::Index>(particles);
        const auto d = static_cast<Eigen::Index>(dim);
        // Distance from x to the subspace {x^(k) = x^(j)} is |x^(k) - x^(j)| / sqrt(2).
        c.g = [m, d](const Vector &x) {
            double best = kInf;
            for (Eigen::Index k = 0; k < m; ++k)
            {
                for (Eigen::Index j = k + 1; j < m; ++j)
                    best = std::min(best, (x.segment(k * d, d) - x.segment(j * d, d)).squaredNorm());
            }
            return std::sqrt(0.5 * best);
        };
        c.label = "collision-free";
        return std::make_shared<ConstraintDomain>("collision-free", particles * dim,
                                                  std::vector<SpatialConstraint>{std::move(c)}, LevelBound::ball, t_max);
    }

    DomainPtr make_product(const std::vector<DomainPtr> &factors)
    {
        if (factors.empty())
            throw ConfigError("product domain needs at least one factor");
        std::size_t total = 0;
        double t_max = kInf;
        bool all_cube = true;
        std::vector<std::shared_ptr<const ConstraintDomain>> parts;
        for (const auto &f : factors)
        {
            auto cd = std::dynamic_pointer_cast<const ConstraintDomain>(f);
            if (!cd)
                throw ConfigError("product factors must be constraint-based domains");
            total += cd->dim();
            t_max = std::min(t_max, cd->t_max());
            all_cube = all_cube && cd->bound() == LevelBound::cube;
            parts.push_back(std::move(cd));
        }
        std::vector<SpatialConstraint> cs;
        std::size_t offset = 0;
        for (const auto &part : parts)
        {
            const auto off = static_cast<Eigen::Index>(offset);
            const auto len = static_cast<Eigen::Index>(part->dim());
            for (const auto &c : part->constraints())
            {
                SpatialConstraint lifted;
                lifted.g = [g = c.g, off, len](const Vector &x) { return g(x.segment(off, len)); };
                lifted.label = c.label;
                if (!c.lo.empty())
                {
                    lifted.lo = fill(total, -kInf);
                    lifted.hi = fill(total, kInf);
                    std::copy(c.lo.begin(), c.lo.end(), lifted.lo.begin() + off);
                    std::copy(c.hi.begin(), c.hi.end(), lifted.hi.begin() + off);
                }
                cs.push_back(std::move(lifted));
            }
            offset += part->dim();
        }
        return std::make_shared<ConstraintDomain>("product", total, std::move(cs),
                                                  all_cube ? LevelBound::cube : LevelBound::ball, t_max);
    }
}
