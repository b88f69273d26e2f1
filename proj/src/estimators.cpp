#include "domsde/estimators.hpp"

#include "domsde/parallel.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace domsde
{
    using nlohmann::json;

    namespace
    {
        constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
        constexpr double kLogMax = 709.0; // exp overflows beyond this
    }

    json to_json(const MonteCarloReport &r)
    {
        auto num = [](double v) -> json {
            if (std::isfinite(v))
                return v;
            if (std::isnan(v))
                return "nan";
            return v > 0 ? "inf" : "-inf";
        };
        json j;
        j["estimand"] = r.estimand;
        j["estimate"] = num(r.estimate);
        j["se"] = num(r.se);
        j["n_paths"] = r.n_paths;
        j["n_used"] = r.n_used;
        j["n_unresolved"] = r.n_unresolved;
        j["ess"] = num(r.ess);
        j["seed"] = r.seed;
        j["config_digest"] = r.config_digest;
        j["valid"] = r.valid;
        j["warnings"] = r.warnings;
        j["extras"] = r.extras;
        return j;
    }

    double pairwise_sum(const double *values, std::size_t n)
    {
        if (n <= 8)
        {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += values[i];
            return s;
        }
        const std::size_t half = n / 2;
        return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
    }

    double pairwise_sum(const std::vector<double> &values) { return pairwise_sum(values.data(), values.size()); }

    std::size_t PathBatch::unresolved() const
    {
        return static_cast<std::size_t>(std::count(status.begin(), status.end(), PathStatus::unresolved));
    }

    PathBatch run_batch(const SimulationSetup &setup, std::size_t width, const PathFunctional &functional,
                        const SimulationOptions &options)
    {
        if (!setup.domain)
            throw ConfigError("simulation setup has no domain");
        PathBatch batch;
        batch.n_paths = setup.n_paths;
        batch.width = width;
        batch.values.assign(setup.n_paths * width, kNaN);
        batch.status.assign(setup.n_paths, PathStatus::survived);
        batch.counters.assign(setup.n_paths, PathCounters{});

        parallel_for(setup.n_paths, setup.workers, [&](std::size_t i) {
            const PathRecord rec = simulate_path(setup.coeffs, *setup.domain, setup.start, setup.horizon,
                                                 setup.policy, setup.seed, i, options);
            batch.status[i] = rec.status;
            batch.counters[i] = rec.counters;
            if (rec.status != PathStatus::unresolved)
                functional(rec, batch.values.data() + i * width);
        });
        return batch;
    }

    namespace
    {
        struct ColumnStats
        {
            std::vector<double> used;
            double mean = kNaN;
            double se = kNaN;
            double var = kNaN;
        };

        ColumnStats column_stats(const PathBatch &batch, std::size_t column)
        {
            ColumnStats c;
            for (std::size_t i = 0; i < batch.n_paths; ++i)
            {
                if (batch.status[i] == PathStatus::unresolved)
                    continue;
                const double v = batch.value(i, column);
                if (!std::isnan(v))
                    c.used.push_back(v);
            }
            const std::size_t n = c.used.size();
            if (n == 0)
                return c;
            c.mean = pairwise_sum(c.used) / static_cast<double>(n);
            if (n > 1 && std::isfinite(c.mean))
            {
                std::vector<double> sq(n);
                for (std::size_t i = 0; i < n; ++i)
                    sq[i] = (c.used[i] - c.mean) * (c.used[i] - c.mean);
                c.var = pairwise_sum(sq) / static_cast<double>(n - 1);
                c.se = std::sqrt(c.var / static_cast<double>(n));
            }
            else if (n == 1 && std::isfinite(c.mean))
            {
                c.var = 0.0;
                c.se = 0.0;
            }
            else
            {
                c.se = kInf;
            }
            return c;
        }

        void attach_diagnostics(MonteCarloReport &r, const PathBatch &batch)
        {
            std::size_t clips = 0, steps = 0, substeps = 0;
            double max_step = 0.0;
            for (const auto &c : batch.counters)
            {
                clips += c.drift_clips;
                steps += c.steps;
                substeps += c.substeps;
                max_step = std::max(max_step, c.max_step);
            }
            r.extras["drift_clips"] = clips;
            r.extras["steps"] = steps;
            r.extras["exit_bisections"] = substeps;
            r.extras["max_step"] = max_step;
            if (clips > 0)
                r.warnings.push_back(std::to_string(clips) + " drift evaluations clipped");
            r.n_unresolved = batch.unresolved();
            if (r.n_unresolved > 0)
            {
                r.warnings.push_back(std::to_string(r.n_unresolved) + " unresolved paths excluded");
                if (100 * r.n_unresolved > batch.n_paths)
                {
                    r.valid = false;
                    r.warnings.push_back("more than 1% of paths unresolved: estimate unreliable");
                }
            }
        }

        MonteCarloReport report_from(const ColumnStats &c, const PathBatch &batch, const std::string &estimand,
                                     const SimulationSetup &setup)
        {
            MonteCarloReport r;
            r.estimand = estimand;
            r.n_paths = batch.n_paths;
            r.n_used = c.used.size();
            r.ess = static_cast<double>(r.n_used);
            r.seed = setup.seed;
            r.estimate = c.mean;
            r.se = c.se;
            attach_diagnostics(r, batch);
            if (r.n_used == 0)
            {
                // An empty conditioning event is a result, not contamination.
                r.warnings.push_back("no paths contribute to this estimand");
            }
            else if (!std::isfinite(r.estimate))
            {
                r.valid = false;
                r.warnings.push_back("non-finite per-path values");
            }
            return r;
        }
    }

    MonteCarloReport summarize(const PathBatch &batch, std::size_t column, const std::string &estimand,
                               const SimulationSetup &setup)
    {
        return report_from(column_stats(batch, column), batch, estimand, setup);
    }

    MonteCarloReport explosion_probability(const SimulationSetup &setup)
    {
        return explosion_probability_curve(setup, {setup.horizon}).front();
    }

    std::vector<MonteCarloReport> explosion_probability_curve(const SimulationSetup &setup,
                                                              const std::vector<double> &horizons)
    {
        if (horizons.empty())
            throw PreconditionError("explosion_probability_curve needs at least one horizon");
        SimulationSetup s = setup;
        s.horizon = *std::max_element(horizons.begin(), horizons.end());
        const std::vector<double> hs = horizons;
        const PathBatch batch = run_batch(s, hs.size(), [&hs](const PathRecord &rec, double *out) {
            for (std::size_t k = 0; k < hs.size(); ++k)
                out[k] = (rec.xi && *rec.xi <= hs[k]) ? 1.0 : 0.0;
        });
        std::vector<MonteCarloReport> out;
        for (std::size_t k = 0; k < hs.size(); ++k)
        {
            MonteCarloReport r = summarize(batch, k, "explosion_probability", s);
            if (r.n_used > 0)
            {
                const double p = r.estimate;
                r.se = std::sqrt(p * (1.0 - p) / static_cast<double>(r.n_used));
            }
            r.extras["horizon"] = hs[k];
            out.push_back(std::move(r));
        }
        return out;
    }

    LifetimeSummary lifetime_statistics(const SimulationSetup &setup)
    {
        const double T = setup.horizon;
        const PathBatch batch = run_batch(setup, 3, [T](const PathRecord &rec, double *out) {
            out[0] = rec.xi ? 1.0 : 0.0;
            out[1] = rec.xi ? *rec.xi : kNaN;
            out[2] = rec.xi ? std::min(*rec.xi, T) : T;
        });
        LifetimeSummary s;
        s.explosion = summarize(batch, 0, "explosion_probability", setup);
        if (s.explosion.n_used > 0)
        {
            const double p = s.explosion.estimate;
            s.explosion.se = std::sqrt(p * (1.0 - p) / static_cast<double>(s.explosion.n_used));
        }
        s.mean_exited_xi = summarize(batch, 1, "mean_lifetime_exited", setup);
        s.mean_censored_xi = summarize(batch, 2, "mean_lifetime_censored", setup);
        for (MonteCarloReport *r : {&s.explosion, &s.mean_exited_xi, &s.mean_censored_xi})
            r->extras["horizon"] = T;
        return s;
    }

    TerminalMoments terminal_moments(const SimulationSetup &setup, std::size_t coordinate)
    {
        if (coordinate >= setup.coeffs.dim)
            throw PreconditionError("terminal_moments coordinate out of range");
        const PathBatch batch = run_batch(setup, 1, [coordinate](const PathRecord &rec, double *out) {
            out[0] = rec.xi ? kNaN : rec.state(rec.size() - 1)[static_cast<Eigen::Index>(coordinate)];
        });
        TerminalMoments m;
        const ColumnStats c = column_stats(batch, 0);
        m.mean = report_from(c, batch, "terminal_mean", setup);
        m.variance = report_from(c, batch, "terminal_variance", setup);
        const std::size_t n = c.used.size();
        if (n > 1)
        {
            std::vector<double> q(n);
            for (std::size_t i = 0; i < n; ++i)
            {
                const double z = c.used[i] - c.mean;
                q[i] = z * z * z * z;
            }
            const double m4 = pairwise_sum(q) / static_cast<double>(n);
            m.variance.estimate = c.var;
            m.variance.se = std::sqrt(std::max(0.0, m4 - c.var * c.var) / static_cast<double>(n));
        }
        for (MonteCarloReport *r : {&m.mean, &m.variance})
        {
            r->extras["coordinate"] = coordinate;
            r->extras["horizon"] = setup.horizon;
            if (r->n_used < r->n_paths)
                r->warnings.push_back(std::to_string(r->n_paths - r->n_used - r->n_unresolved) +
                                      " paths exited before the horizon and are not in the terminal law");
        }
        return m;
    }

    MonteCarloReport sup_exp_moment(const SimulationSetup &setup, const TheoremConstants &constants)
    {
        if (!setup.coeffs.potential)
            throw PreconditionError("sup_exp_moment requires a gradient-type model with a potential");
        const PotentialField pot = *setup.coeffs.potential;
        const double mu = constants.mu;
        const double mu_nu = constants.mu * constants.nu;
        const PathBatch batch = run_batch(setup, 2, [&pot, mu, mu_nu](const PathRecord &rec, double *out) {
            double best = -kInf;
            for (std::size_t k = 0; k < rec.size(); ++k)
            {
                const Vector x = rec.state(k);
                const double e = mu * pot.phi(rec.start.t + rec.times[k], x) + mu_nu * x.squaredNorm();
                best = std::max(best, e);
            }
            out[0] = best > kLogMax ? kInf : std::exp(best);
            out[1] = best;
        });
        MonteCarloReport r = summarize(batch, 0, "sup_exp_moment", setup);
        double log_max = -kInf;
        for (std::size_t i = 0; i < batch.n_paths; ++i)
        {
            if (batch.status[i] != PathStatus::unresolved)
                log_max = std::max(log_max, batch.value(i, 1));
        }
        r.extras["max_log_integrand"] = std::isfinite(log_max) ? json(log_max) : json("inf");
        r.extras["epsilon"] = constants.epsilon;
        r.extras["K1"] = constants.K1;
        r.extras["K"] = constants.K;
        r.extras["T"] = constants.T;
        r.extras["delta"] = constants.delta;
        r.extras["mu"] = constants.mu;
        r.extras["nu"] = constants.nu;
        r.extras["horizon"] = setup.horizon;
        return r;
    }

    namespace
    {
        /// Left-endpoint quadrature of w(t_abs, x) over [S, min(T, end)] on the path grid.
        template <class W>
        double path_integral(const PathRecord &rec, double S, double T, W &&w)
        {
            const double end = std::min(T, rec.end_time());
            double acc = 0.0;
            for (std::size_t k = 0; k < rec.size(); ++k)
            {
                const double a = std::max(rec.times[k], S);
                const double b = std::min(k + 1 < rec.size() ? rec.times[k + 1] : end, end);
                if (!(b > a))
                    continue;
                acc += w(rec.start.t + rec.times[k], rec.state(k)) * (b - a);
            }
            return acc;
        }
    }

    KrylovResult krylov_ratio(const SimulationSetup &setup, const std::vector<KrylovFunction> &family, double S,
                              double p, double q, std::size_t norm_resolution)
    {
        const double T = setup.horizon;
        if (!(S >= 0.0 && S < T))
            throw PreconditionError("krylov_ratio requires 0 <= S < T");

        std::vector<double> norms;
        for (const auto &m : family)
            norms.push_back(lp_lq_norm(m.f, S, T, m.lo, m.hi, p, q, norm_resolution).value);

        const PathBatch batch = run_batch(setup, family.size(), [&](const PathRecord &rec, double *out) {
            for (std::size_t j = 0; j < family.size(); ++j)
            {
                const ScalarField &f = family[j].f;
                out[j] = path_integral(rec, S, T, [&f](double t, const Vector &x) { return std::abs(f(t, x)); });
            }
        });

        KrylovResult result;
        for (std::size_t j = 0; j < family.size(); ++j)
        {
            MonteCarloReport r = summarize(batch, j, "krylov_ratio", setup);
            const double numerator = r.estimate, numerator_se = r.se;
            r.extras["member"] = family[j].name;
            r.extras["numerator"] = numerator;
            r.extras["numerator_se"] = numerator_se;
            r.extras["norm"] = norms[j];
            r.extras["p"] = p;
            r.extras["q"] = q;
            r.extras["S"] = S;
            r.extras["T"] = T;
            if (!(norms[j] > 0.0))
            {
                r.warnings.push_back("zero L^q_p norm: member skipped");
                r.estimate = 0.0;
                r.se = 0.0;
                r.extras["skipped"] = true;
            }
            else
            {
                r.estimate = numerator / norms[j];
                r.se = numerator_se / norms[j];
                result.max_ratio = std::max(result.max_ratio, r.estimate);
            }
            result.members.push_back(std::move(r));
        }
        return result;
    }

    MonteCarloReport exp_functional(const SimulationSetup &setup, const ScalarField &g, double kappa)
    {
        const double T = setup.horizon;
        const PathBatch batch = run_batch(setup, 1, [&](const PathRecord &rec, double *out) {
            if (kappa == 0.0)
            {
                out[0] = 1.0;
                return;
            }
            const double integral = path_integral(rec, 0.0, T, [&g](double t, const Vector &x) {
                const double v = g(t, x);
                return v * v;
            });
            out[0] = std::exp(kappa * integral);
        });
        MonteCarloReport r = summarize(batch, 0, "exp_functional", setup);
        r.extras["kappa"] = kappa;
        r.extras["horizon"] = T;

        const ColumnStats c = column_stats(batch, 0);
        if (c.used.size() >= 100)
        {
            std::vector<double> sorted = c.used;
            std::sort(sorted.begin(), sorted.end(), std::greater<double>());
            const std::size_t top = std::max<std::size_t>(1, sorted.size() / 100);
            const double head = pairwise_sum(sorted.data(), top);
            const double total = pairwise_sum(sorted);
            r.extras["top1pct_share"] = total > 0.0 ? head / total : 0.0;
            if (total > 0.0 && head > 0.5 * total)
                r.warnings.push_back("heavy tail: the largest 1% of values carry more than half of the mass");
        }
        return r;
    }

    MonteCarloReport run_moment(const SimulationSetup &setup, int n_level, double alpha)
    {
        if (n_level < 1)
            throw PreconditionError("run_moment requires n_level >= 1");
        if (!(alpha >= 0.0 && alpha < 0.5))
            throw DomainConstraintError("alpha must lie in [0, 1/2)");
        const Region qn = setup.domain->exhaustion_level(n_level);
        const Region qn1 = setup.domain->exhaustion_level(n_level + 1);
        const PathBatch batch = run_batch(setup, 2, [&](const PathRecord &rec, double *out) {
            const auto nu = static_cast<double>(run_counter(rec, qn, qn1));
            out[0] = nu == 0.0 ? 0.0 : std::pow(nu, alpha);
            out[1] = nu;
        });
        MonteCarloReport r = summarize(batch, 0, "run_moment", setup);
        const ColumnStats counts = column_stats(batch, 1);
        double max_nu = 0.0;
        bool all_finite = true;
        for (double v : counts.used)
        {
            max_nu = std::max(max_nu, v);
            all_finite = all_finite && std::isfinite(v);
        }
        r.extras["alpha"] = alpha;
        r.extras["n_level"] = n_level;
        r.extras["S"] = setup.horizon;
        r.extras["mean_runs"] = counts.mean;
        r.extras["max_runs"] = max_nu;
        r.extras["all_finite"] = all_finite;
        return r;
    }

    double girsanov_log_weight(const PathRecord &path, const VectorField &b1, const VectorField &b2,
                               const DiffusionField &diff)
    {
        if (!path.has_increments() && path.size() > 1)
            throw PreconditionError("girsanov weight needs a path simulated with retained increments");
        const std::size_t steps = path.size() - 1;
        std::vector<double> terms(steps);
        for (std::size_t k = 0; k < steps; ++k)
        {
            const double t = path.start.t + path.times[k];
            const Vector x = path.state(k);
            const Vector db = b2(t, x) - b1(t, x);
            if (db.isZero(0.0))
            {
                terms[k] = 0.0;
                continue;
            }
            const Matrix sig = diff.sigma(t, x);
            Eigen::FullPivLU<Matrix> lu(sig);
            if (!lu.isInvertible())
                throw SingularDiffusionError(SpaceTimePoint{t, x});
            const Vector y = lu.solve(db);
            const double dt = path.times[k + 1] - path.times[k];
            terms[k] = y.dot(path.increment(k)) - 0.5 * y.squaredNorm() * dt;
        }
        return pairwise_sum(terms);
    }

    double girsanov_weight(const PathRecord &path, const VectorField &b1, const VectorField &b2,
                           const DiffusionField &diff)
    {
        return std::exp(girsanov_log_weight(path, b1, b2, diff));
    }

    GirsanovCheck girsanov_check(const SimulationSetup &setup, const VectorField &b2, const ScalarField &f)
    {
        const VectorField b1 = setup.coeffs.drift;
        const DiffusionField diff = setup.coeffs.diffusion;
        const double T = setup.horizon;
        SimulationOptions keep;
        keep.keep_increments = true;

        const PathBatch weighted = run_batch(
            setup, 3,
            [&](const PathRecord &rec, double *out) {
                const double rho = girsanov_weight(rec, b1, b2, diff);
                out[0] = rho;
                out[1] = rec.xi ? kNaN : f(rec.start.t + T, rec.state(rec.size() - 1)) * rho;
                out[2] = rho * rho;
            },
            keep);

        GirsanovCheck g;
        g.weight_mean = summarize(weighted, 0, "girsanov_weight_mean", setup);
        g.reweighted = summarize(weighted, 1, "girsanov_reweighted", setup);
        const ColumnStats w = column_stats(weighted, 0);
        const ColumnStats w2 = column_stats(weighted, 2);
        if (!w.used.empty())
        {
            const double sum = pairwise_sum(w.used);
            const double sum2 = pairwise_sum(w2.used);
            const double ess = sum2 > 0.0 ? sum * sum / sum2 : 0.0;
            g.weight_mean.ess = ess;
            g.reweighted.ess = ess;
        }

        SimulationSetup direct = setup;
        direct.coeffs.drift = b2;
        direct.seed = setup.seed + 1;
        const PathBatch plain = run_batch(direct, 1, [&](const PathRecord &rec, double *out) {
            out[0] = rec.xi ? kNaN : f(rec.start.t + T, rec.state(rec.size() - 1));
        });
        g.direct = summarize(plain, 0, "girsanov_direct", direct);

        g.z_weight = g.weight_mean.se > 0.0 ? (g.weight_mean.estimate - 1.0) / g.weight_mean.se : 0.0;
        const double combined = std::hypot(g.reweighted.se, g.direct.se);
        g.z_cross = combined > 0.0 ? (g.reweighted.estimate - g.direct.estimate) / combined : 0.0;
        g.weight_mean.extras["z"] = g.z_weight;
        g.reweighted.extras["z_vs_direct"] = g.z_cross;
        return g;
    }
}
