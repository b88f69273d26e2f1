#pragma once

#include "domsde/types.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace domsde
{
    inline constexpr double kInf = std::numeric_limits<double>::infinity();

    /// Axis-aligned box in (t, x) coordinates. Infinite extents are allowed;
    /// grid-based routines require finite() to hold.
    struct BoundingBox
    {
        double t_lo = 0.0;
        double t_hi = kInf;
        std::vector<double> lo;
        std::vector<double> hi;

        std::size_t dim() const noexcept { return lo.size(); }
        bool finite() const noexcept;
        bool empty() const noexcept;
        BoundingBox intersect(const BoundingBox &other) const;
    };

    /// Signed clearance of a point with respect to a set: positive inside, with
    /// magnitude a lower bound on the Euclidean distance (in R^{d+1}) to the
    /// boundary; non-positive outside.
    using DepthFn = std::function<double(const SpaceTimePoint &)>;

    /// An exhaustion level Q^n: a bounded open set given by an intersection of
    /// depth constraints, plus a finite bounding box.
    class Region
    {
    public:
        Region(std::size_t dim, BoundingBox box, std::vector<DepthFn> constraints, std::string label);

        std::size_t dim() const noexcept { return dim_; }
        const BoundingBox &box() const noexcept { return box_; }
        const std::string &label() const noexcept { return label_; }

        /// min over constraints; +inf for an unconstrained region.
        double depth(const SpaceTimePoint &p) const;
        bool contains(const SpaceTimePoint &p) const { return depth(p) > 0.0; }
        bool contains_closure(const SpaceTimePoint &p) const { return depth(p) >= 0.0; }

    private:
        std::size_t dim_;
        BoundingBox box_;
        std::vector<DepthFn> constraints_;
        std::string label_;
    };

    /// Tensor grid over a finite bounding box in (t, x). With `cell_centres`
    /// the nodes are midpoints of `resolution` equal cells per axis; otherwise
    /// `resolution` nodes including both endpoints.
    class TensorGrid
    {
    public:
        TensorGrid(const BoundingBox &box, std::size_t resolution, bool cell_centres);
        /// Per-axis resolution chosen so that the total point count stays below `budget`.
        static std::size_t resolution_for_budget(std::size_t axes, std::size_t budget);

        std::size_t size() const noexcept { return total_; }
        SpaceTimePoint point(std::size_t index) const;
        /// Spacing along axis 0 (time) and 1..d (space).
        double spacing(std::size_t axis) const { return step_[axis]; }

    private:
        std::vector<double> origin_;
        std::vector<double> step_;
        std::size_t resolution_;
        std::size_t total_;
    };
}
