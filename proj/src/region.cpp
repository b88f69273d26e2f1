#include "domsde/region.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace domsde
{
    std::string describe(const SpaceTimePoint &p)
    {
        std::ostringstream os;
        os.precision(17);
        os << "(t=" << p.t << ", x=[";
        for (Eigen::Index i = 0; i < p.x.size(); ++i)
            os << (i ? ", " : "") << p.x[i];
        os << "])";
        return os.str();
    }

    DimensionError::DimensionError(std::size_t expected, std::size_t got)
        : ConfigError("dimension mismatch: expected " + std::to_string(expected) + ", got " + std::to_string(got))
    {
    }

    StencilError::StencilError(double required, double available)
        : std::runtime_error("finite-difference stencil leaves the domain: requires clearance > " +
                             std::to_string(required) + ", available " + std::to_string(available)),
          required_clearance(required), available_clearance(available)
    {
    }

    SingularityError::SingularityError(SpaceTimePoint where, const std::string &what)
        : std::runtime_error("singularity at " + describe(where) + ": " + what), point(std::move(where))
    {
    }

    SingularDiffusionError::SingularDiffusionError(SpaceTimePoint where)
        : std::runtime_error("diffusion matrix not invertible at " + describe(where)), point(std::move(where))
    {
    }

    bool BoundingBox::finite() const noexcept
    {
        if (!std::isfinite(t_lo) || !std::isfinite(t_hi))
            return false;
        for (std::size_t i = 0; i < lo.size(); ++i)
        {
            if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]))
                return false;
        }
        return true;
    }

    bool BoundingBox::empty() const noexcept
    {
        if (!(t_lo < t_hi))
            return true;
        for (std::size_t i = 0; i < lo.size(); ++i)
        {
            if (!(lo[i] < hi[i]))
                return true;
        }
        return false;
    }

    BoundingBox BoundingBox::intersect(const BoundingBox &other) const
    {
        BoundingBox out = *this;
        out.t_lo = std::max(t_lo, other.t_lo);
        out.t_hi = std::min(t_hi, other.t_hi);
        for (std::size_t i = 0; i < lo.size(); ++i)
        {
            out.lo[i] = std::max(lo[i], other.lo[i]);
            out.hi[i] = std::min(hi[i], other.hi[i]);
        }
        return out;
    }

    Region::Region(std::size_t dim, BoundingBox box, std::vector<DepthFn> constraints, std::string label)
        : dim_(dim), box_(std::move(box)), constraints_(std::move(constraints)), label_(std::move(label))
    {
        if (box_.dim() != dim_)
            throw DimensionError(dim_, box_.dim());
    }

    double Region::depth(const SpaceTimePoint &p) const
    {
        double d = kInf;
        for (const auto &c : constraints_)
        {
            d = std::min(d, c(p));
            if (std::isnan(d))
                return -kInf;
        }
        return d;
    }

    TensorGrid::TensorGrid(const BoundingBox &box, std::size_t resolution, bool cell_centres)
        : resolution_(std::max<std::size_t>(resolution, 1))
    {
        if (!box.finite())
            throw PreconditionError("tensor grid requires a finite bounding box");
        const std::size_t axes = box.dim() + 1;
        origin_.resize(axes);
        step_.resize(axes);
        auto setup = [&](std::size_t axis, double lo, double hi) {
            if (cell_centres || resolution_ == 1)
            {
                step_[axis] = (hi - lo) / static_cast<double>(resolution_);
                origin_[axis] = lo + 0.5 * step_[axis];
            }
            else
            {
                step_[axis] = (hi - lo) / static_cast<double>(resolution_ - 1);
                origin_[axis] = lo;
            }
        };
        setup(0, box.t_lo, box.t_hi);
        for (std::size_t i = 0; i < box.dim(); ++i)
            setup(i + 1, box.lo[i], box.hi[i]);

        total_ = 1;
        for (std::size_t a = 0; a < axes; ++a)
            total_ *= resolution_;
    }

    std::size_t TensorGrid::resolution_for_budget(std::size_t axes, std::size_t budget)
    {
        std::size_t r = 1;
        while (true)
        {
            std::size_t total = 1;
            for (std::size_t a = 0; a < axes; ++a)
                total *= (r + 1);
            if (total > budget)
                return r;
            ++r;
        }
    }

    SpaceTimePoint TensorGrid::point(std::size_t index) const
    {
        const std::size_t axes = origin_.size();
        SpaceTimePoint p;
        p.x.resize(static_cast<Eigen::Index>(axes - 1));
        for (std::size_t a = 0; a < axes; ++a)
        {
            const std::size_t k = index % resolution_;
            index /= resolution_;
            const double v = origin_[a] + static_cast<double>(k) * step_[a];
            if (a == 0)
                p.t = v;
            else
                p.x[static_cast<Eigen::Index>(a - 1)] = v;
        }
        return p;
    }
}
