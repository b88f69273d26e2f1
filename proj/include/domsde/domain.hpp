#pragma once

#include "domsde/region.hpp"
#include "domsde/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace domsde
{
    /// Open space-time domain Q in R_+ x R^d together with an exhaustion
    /// Q^1, Q^2, ... of bounded open sets with closure(Q^n) inside Q^{n+1}.
    ///
    /// The time axis is R_+ = [0, inf): points on t = 0 belong to Q when their
    /// spatial part does (Q is open relative to R_+ x R^d), but the face t = 0 still
    /// counts as boundary for boundary_distance. Every other boundary point is outside.
    class SpaceTimeDomain
    {
    public:
        virtual ~SpaceTimeDomain() = default;

        virtual std::size_t dim() const = 0;
        virtual std::string name() const = 0;

        /// Throws DimensionError on mismatch and PreconditionError for t < 0.
        bool contains(const SpaceTimePoint &p) const;
        Region exhaustion_level(int n) const;

        /// Certified lower bound on the distance in R^{d+1} from p to the boundary.
        /// Throws PreconditionError if p is not in Q.
        double boundary_distance(const SpaceTimePoint &p) const;

        /// Distance to the part of the boundary a forward-in-time path can reach:
        /// spatial boundary and finite upper time limits, not the t = 0 face.
        /// Returns a non-positive number outside Q. Used for step-size control.
        virtual double clearance(const SpaceTimePoint &p) const = 0;

    protected:
        virtual bool contains_impl(const SpaceTimePoint &p) const = 0;
        virtual Region level_impl(int n) const = 0;
        virtual double distance_impl(const SpaceTimePoint &p) const = 0;
        void check_dim(const SpaceTimePoint &p) const;
    };

    using DomainPtr = std::shared_ptr<const SpaceTimeDomain>;

    /// Spatial constraint g(x) > 0 where g is a signed distance lower bound.
    /// Axis-aligned constraints also publish the per-axis extent of {g > 0}, which
    /// is shrunk by the level margin when building bounding boxes.
    struct SpatialConstraint
    {
        std::function<double(const Vector &)> g;
        std::string label;
        std::vector<double> lo; // empty when not axis-aligned
        std::vector<double> hi;
    };

    enum class LevelBound
    {
        ball, ///< |x| < n
        cube  ///< |x_i| < n for every i
    };

    /// Domain Q = [0, t_max) x {x : g_i(x) > 0 for all i}. Level n is
    /// (0, min(n, t_max - 1/n)) x {g_i > 1/n} intersected with the ball or cube of radius n.
    class ConstraintDomain final : public SpaceTimeDomain
    {
    public:
        ConstraintDomain(std::string name, std::size_t dim, std::vector<SpatialConstraint> constraints,
                         LevelBound bound = LevelBound::ball, double t_max = kInf);

        std::size_t dim() const override { return dim_; }
        std::string name() const override { return name_; }
        double clearance(const SpaceTimePoint &p) const override;

        const std::vector<SpatialConstraint> &constraints() const noexcept { return constraints_; }
        LevelBound bound() const noexcept { return bound_; }
        double t_max() const noexcept { return t_max_; }

        /// min_i g_i(x), +inf when unconstrained.
        double spatial_depth(const Vector &x) const;

    protected:
        bool contains_impl(const SpaceTimePoint &p) const override;
        Region level_impl(int n) const override;
        double distance_impl(const SpaceTimePoint &p) const override;

    private:
        std::string name_;
        std::size_t dim_;
        std::vector<SpatialConstraint> constraints_;
        LevelBound bound_;
        double t_max_;
    };

    /// Domain known only through a membership predicate. Distances are estimated by
    /// probing 2(d+1) axis rays plus 16 fixed pseudo-random rays with bisection, so
    /// they are lower bounds only up to ray coverage. Level n is
    /// (1/n, n) x (B_n intersected with {probed distance > 1/n}).
    class PredicateDomain final : public SpaceTimeDomain
    {
    public:
        using Predicate = std::function<bool(double t, const Vector &x)>;

        PredicateDomain(std::string name, std::size_t dim, Predicate predicate, double probe_radius = 1.0);

        std::size_t dim() const override { return dim_; }
        std::string name() const override { return name_; }
        double clearance(const SpaceTimePoint &p) const override;

    protected:
        bool contains_impl(const SpaceTimePoint &p) const override;
        Region level_impl(int n) const override;
        double distance_impl(const SpaceTimePoint &p) const override;

    private:
        struct Prober;

        std::string name_;
        std::size_t dim_;
        std::shared_ptr<const Prober> prober_;
    };

    /// Smallest n <= n_max with p in Q^n. Throws PreconditionError when p is not in Q.
    std::optional<int> which_level(const SpaceTimeDomain &domain, const SpaceTimePoint &p, int n_max);

    /// A point of the one-point compactification Q' = Q u {cemetery}.
    class CompactifiedState
    {
    public:
        static CompactifiedState cemetery() { return CompactifiedState{}; }
        static CompactifiedState at(SpaceTimePoint p);

        bool is_cemetery() const noexcept { return !point_.has_value(); }
        const SpaceTimePoint &point() const;

        /// Transition to `candidate`. The cemetery is absorbing; leaving Q sends the
        /// state to the cemetery.
        CompactifiedState advance(const SpaceTimeDomain &domain, SpaceTimePoint candidate) const;

    private:
        CompactifiedState() = default;
        std::optional<SpaceTimePoint> point_;
    };

    // Builtin domains.
    DomainPtr make_full_space(std::size_t dim, double t_max = kInf);
    /// {x : <normal, x> > offset}
    DomainPtr make_halfspace(const Vector &normal, double offset, double t_max = kInf);
    /// R_+ x (0, inf), d = 1.
    DomainPtr make_half_line();
    DomainPtr make_box(const std::vector<double> &lo, const std::vector<double> &hi, double t_max = kInf);
    /// {x : lo < <normal, x> < hi}
    DomainPtr make_slab(const Vector &normal, double lo, double hi, double t_max = kInf);
    /// R^d with the hyperplane {x_axis = value} removed; cube-bounded levels.
    DomainPtr make_punctured(std::size_t dim, std::size_t axis = 0, double value = 0.0, double t_max = kInf);
    /// Complement of the closed rho-neighbourhood of a finite point set.
    DomainPtr make_point_exclusion(std::size_t dim, std::vector<Vector> points, double rho, double t_max = kInf);
    /// R^{M d} with all collision sets {x^(k) = x^(j)} removed.
    DomainPtr make_collision_free(std::size_t particles, std::size_t dim, double t_max = kInf);
    /// Cartesian product of constraint domains on consecutive coordinate blocks.
    /// Throws ConfigError if a factor is not constraint-based.
    DomainPtr make_product(const std::vector<DomainPtr> &factors);
}
