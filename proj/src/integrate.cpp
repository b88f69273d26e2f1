#include "domsde/integrate.hpp"

#include "domsde/parallel.hpp"
#include "domsde/rng.hpp"

#include <algorithm>
#include <cmath>

namespace domsde
{
    StepPolicy StepPolicy::fixed(double dt)
    {
        StepPolicy p;
        p.dt_max = dt;
        p.dt_min = dt;
        p.c1 = kInf;
        p.c2 = kInf;
        return p;
    }

    void StepPolicy::validate() const
    {
        if (!(dt_min > 0.0) || !(dt_min <= dt_max) || !std::isfinite(dt_max))
            throw ConfigError("step policy requires 0 < dt_min <= dt_max < inf");
        if (!(tol_xi > 0.0))
            throw ConfigError("step policy requires tol_xi > 0");
        if (!(c1 > 0.0) || !(c2 > 0.0))
            throw ConfigError("step policy requires c1 > 0 and c2 > 0");
        if (!(b_max > 0.0))
            throw ConfigError("step policy requires b_max > 0");
        if (max_steps == 0)
            throw ConfigError("step policy requires max_steps > 0");
    }

    std::string to_string(PathStatus s)
    {
        switch (s)
        {
        case PathStatus::survived:
            return "survived";
        case PathStatus::exited:
            return "exited";
        case PathStatus::unresolved:
            return "unresolved";
        }
        return "unknown";
    }

    Eigen::Map<const Vector> PathRecord::state(std::size_t k) const
    {
        return Eigen::Map<const Vector>(state_data.data() + k * dim, static_cast<Eigen::Index>(dim));
    }

    Eigen::Map<const Vector> PathRecord::increment(std::size_t k) const
    {
        return Eigen::Map<const Vector>(increment_data.data() + k * dim, static_cast<Eigen::Index>(dim));
    }

    double PathRecord::end_time() const noexcept
    {
        if (xi)
            return *xi;
        return times.empty() ? 0.0 : times.back();
    }

    double step_size(const StepPolicy &policy, double clearance, double drift_norm, double k_est) noexcept
    {
        double dt = policy.dt_max;
        if (k_est > 0.0 && std::isfinite(clearance))
            dt = std::min(dt, policy.c1 * clearance * clearance / k_est);
        if (std::isfinite(policy.c2))
            dt = std::min(dt, policy.c2 / (1.0 + drift_norm * drift_norm));
        if (!(dt >= policy.dt_min)) // also catches NaN
            dt = policy.dt_min;
        return std::min(dt, policy.dt_max);
    }

    double step_size(const StepPolicy &policy, const SpaceTimePoint &p, const CoefficientSet &coeffs,
                     const SpaceTimeDomain &domain)
    {
        if (!domain.contains(p))
            throw PreconditionError("step_size requires a point of Q, got " + describe(p));
        Vector b = coeffs.drift(p.t, p.x);
        const double bn = std::min(b.norm(), policy.b_max);
        return step_size(policy, domain.clearance(p), bn, gershgorin_bound(coeffs.diffusion.a(p.t, p.x)));
    }

    namespace
    {
        void push_state(PathRecord &rec, double t, const Vector &x)
        {
            rec.times.push_back(t);
            rec.state_data.insert(rec.state_data.end(), x.data(), x.data() + x.size());
        }

        void pop_state(PathRecord &rec)
        {
            rec.times.pop_back();
            rec.state_data.resize(rec.state_data.size() - rec.dim);
            if (!rec.increment_data.empty())
                rec.increment_data.resize(rec.increment_data.size() - rec.dim);
        }
    }

    PathRecord simulate_path(const CoefficientSet &coeffs, const SpaceTimeDomain &domain, const SpaceTimePoint &start,
                             double horizon, const StepPolicy &policy, std::uint64_t seed, std::uint64_t index,
                             const SimulationOptions &options)
    {
        policy.validate();
        if (coeffs.dim != domain.dim())
            throw DimensionError(domain.dim(), coeffs.dim);
        if (!(horizon > 0.0) || !std::isfinite(horizon))
            throw PreconditionError("horizon must be finite and positive");
        if (!domain.contains(start))
            throw PreconditionError("start point must lie in Q, got " + describe(start));

        const std::size_t d = coeffs.dim;
        const auto dd = static_cast<Eigen::Index>(d);
        PathRecord rec;
        rec.start = start;
        rec.horizon = horizon;
        rec.dim = d;
        rec.seed = seed;
        rec.index = index;
        push_state(rec, 0.0, start.x);

        GaussianSource gauss(make_stream(seed, index, StreamTag::path));
        const double s = start.t;
        double t = 0.0;
        Vector x = start.x;
        Vector zeta(dd);

        auto singular_exit = [&](const std::string &why) {
            if (rec.size() > 1)
            {
                pop_state(rec);
                rec.status = PathStatus::exited;
                rec.xi = t;
                rec.note = why;
            }
            else
            {
                rec.status = PathStatus::unresolved;
                rec.note = "coefficients singular at the start point: " + why;
            }
        };

        while (t < horizon)
        {
            if (rec.counters.steps >= policy.max_steps)
            {
                rec.status = PathStatus::unresolved;
                rec.note = "step budget exhausted";
                break;
            }
            const SpaceTimePoint p{s + t, x};

            Vector b;
            Matrix sig;
            try
            {
                b = coeffs.drift(p.t, x);
                sig = coeffs.diffusion.sigma(p.t, x);
            }
            catch (const SingularityError &e)
            {
                singular_exit(e.what());
                break;
            }
            if (!b.allFinite() || !sig.allFinite())
            {
                singular_exit("non-finite coefficient at " + describe(p));
                break;
            }

            const double bn = b.norm();
            if (bn > policy.b_max)
            {
                b *= policy.b_max / bn;
                if (++rec.counters.drift_clips > policy.clip_cap)
                {
                    rec.status = PathStatus::unresolved;
                    rec.note = "drift clip count exceeded the cap";
                    break;
                }
            }

            const double clear = domain.clearance(p);
            rec.counters.min_boundary_distance = std::min(rec.counters.min_boundary_distance, clear);
            const Matrix a = sig * sig.transpose();
            double dt = step_size(policy, clear, std::min(bn, policy.b_max), gershgorin_bound(a));
            const double remaining = horizon - t;
            const bool last = dt >= remaining * (1.0 - 1e-12);
            if (last)
                dt = remaining;

            for (Eigen::Index i = 0; i < dd; ++i)
                zeta[i] = gauss();
            const Vector dW = std::sqrt(dt) * zeta;
            const Vector incr = b * dt + sig * dW;
            const Vector xn = x + incr;
            const double tn = last ? horizon : t + dt;

            ++rec.counters.steps;
            rec.counters.max_step = std::max(rec.counters.max_step, dt);

            if (domain.contains(SpaceTimePoint{s + tn, xn}))
            {
                push_state(rec, tn, xn);
                if (options.keep_increments)
                    rec.increment_data.insert(rec.increment_data.end(), dW.data(), dW.data() + dd);
                t = tn;
                x = xn;
                continue;
            }

            // Exit inside this step: bisect the fraction theta along the chord x + theta * incr.
            double lo = 0.0, hi = 1.0;
            while ((hi - lo) * dt > policy.tol_xi)
            {
                const double mid = 0.5 * (lo + hi);
                const SpaceTimePoint q{s + t + mid * dt, x + mid * incr};
                if (domain.contains(q))
                    lo = mid;
                else
                    hi = mid;
                ++rec.counters.substeps;
            }
            rec.status = PathStatus::exited;
            rec.xi = t + hi * dt;
            break;
        }
        return rec;
    }

    std::vector<PathRecord> simulate_paths(const CoefficientSet &coeffs, const SpaceTimeDomain &domain,
                                           const SpaceTimePoint &start, double horizon, const StepPolicy &policy,
                                           std::uint64_t seed, std::size_t n_paths, std::size_t workers,
                                           const SimulationOptions &options)
    {
        std::vector<PathRecord> out(n_paths);
        parallel_for(n_paths, workers, [&](std::size_t i) {
            out[i] = simulate_path(coeffs, domain, start, horizon, policy, seed, i, options);
        });
        return out;
    }

    std::size_t run_counter(const PathRecord &path, const Region &level_n, const Region &level_n1)
    {
        const double s = path.start.t;
        bool armed = false;
        std::size_t runs = 0;
        for (std::size_t k = 0; k < path.size(); ++k)
        {
            const SpaceTimePoint p{s + path.times[k], Vector(path.state(k))};
            if (armed && !level_n1.contains(p))
            {
                ++runs;
                armed = false;
            }
            if (!armed && level_n.contains_closure(p))
                armed = true;
        }
        if (armed && path.cemetery())
            ++runs;
        return runs;
    }

    std::size_t run_counter(const PathRecord &path, const SpaceTimeDomain &domain, int n)
    {
        if (n < 1)
            throw PreconditionError("run_counter requires n >= 1");
        return run_counter(path, domain.exhaustion_level(n), domain.exhaustion_level(n + 1));
    }

    std::optional<double> level_exit_time(const PathRecord &path, const Region &level)
    {
        const double s = path.start.t;
        for (std::size_t k = 0; k < path.size(); ++k)
        {
            if (!level.contains_closure(SpaceTimePoint{s + path.times[k], Vector(path.state(k))}))
                return path.times[k];
        }
        if (path.cemetery())
            return path.xi;
        return std::nullopt;
    }
}
