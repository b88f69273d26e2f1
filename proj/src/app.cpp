#include "domsde/app.hpp"

#include "domsde/estimators.hpp"
#include "domsde/lyapunov.hpp"
#include "domsde/models.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace domsde
{
    using nlohmann::json;

    namespace
    {
        json num(double v)
        {
            if (std::isfinite(v))
                return v;
            if (std::isnan(v))
                return "nan";
            return v > 0 ? "inf" : "-inf";
        }

        json point_json(const SpaceTimePoint &p)
        {
            json x = json::array();
            for (Eigen::Index i = 0; i < p.x.size(); ++i)
                x.push_back(num(p.x[i]));
            return {{"t", num(p.t)}, {"x", x}};
        }

        json certificate_json(const LyapunovCertificate &c)
        {
            json j;
            j["inequality"] = to_string(c.inequality);
            j["verdict"] = to_string(c.verdict);
            j["constant_name"] = c.constant_name;
            j["constant"] = num(c.constant);
            j["declared"] = c.declared ? num(*c.declared) : json();
            j["max_violation"] = num(c.max_violation);
            j["violation_count"] = c.violation_count;
            j["points_checked"] = c.points_checked;
            j["points_skipped"] = c.points_skipped;
            j["grid_resolution"] = c.grid_resolution;
            j["moll_width"] = c.moll_width;
            json extras = json::object();
            for (const auto &[k, v] : c.extras)
                extras[k] = num(v);
            j["extras"] = extras;
            j["notes"] = c.notes;
            json pts = json::array();
            for (const auto &p : c.violations)
                pts.push_back(point_json(p));
            j["violations"] = pts;
            return j;
        }

        struct Context
        {
            ModelSpec spec;
            DomainPtr domain;
            SimulationSetup setup;
            std::string digest;
        };

        Context make_context(const RunConfig &cfg)
        {
            Context c{make_model(cfg.model, cfg.model_params), nullptr, {}, config_digest(cfg)};
            c.domain = cfg.domain.is_null() ? c.spec.domain : make_domain(cfg.domain);
            c.setup.coeffs = c.spec.coeffs;
            c.setup.domain = c.domain;
            c.setup.start = SpaceTimePoint{cfg.start_t, Eigen::Map<const Vector>(
                                                            cfg.start_x.data(), static_cast<Eigen::Index>(cfg.start_x.size()))};
            c.setup.horizon = cfg.horizon;
            c.setup.policy = cfg.policy;
            c.setup.seed = cfg.seed;
            c.setup.n_paths = cfg.n_paths;
            c.setup.workers = cfg.workers;
            if (!c.domain->contains(c.setup.start))
                throw ConfigError("start point " + describe(c.setup.start) + " is not in the domain");
            return c;
        }

        const PotentialField &require_potential(const Context &c, const std::string &what)
        {
            if (!c.spec.coeffs.potential)
                throw ConfigError(what + " requires a gradient-type model; '" + c.spec.name + "' is not");
            return *c.spec.coeffs.potential;
        }

        std::optional<ScalarField> configured_h(const RunConfig &cfg, const Context &c)
        {
            if (cfg.h)
            {
                const double h = *cfg.h;
                return ScalarField([h](double, const Vector &) { return h; });
            }
            if (c.spec.coeffs.potential && c.spec.coeffs.potential->lyapunov && c.spec.coeffs.potential->lyapunov->h)
                return c.spec.coeffs.potential->lyapunov->h;
            return std::nullopt;
        }

        std::string csv_number(double v)
        {
            if (std::isnan(v))
                return "nan";
            char buf[32];
            const auto res = std::to_chars(buf, buf + sizeof buf, v);
            return std::string(buf, res.ptr);
        }

        void cmd_simulate(const RunConfig &cfg, Context &c, CommandResult &out, json &r)
        {
            const auto paths = simulate_paths(c.setup.coeffs, *c.domain, c.setup.start, c.setup.horizon,
                                              c.setup.policy, c.setup.seed, c.setup.n_paths, c.setup.workers);
            std::size_t exited = 0, unresolved = 0, clips = 0, substeps = 0, steps = 0;
            double max_step = 0.0;
            json per_path = json::array();
            for (const auto &p : paths)
            {
                exited += p.status == PathStatus::exited;
                unresolved += p.status == PathStatus::unresolved;
                clips += p.counters.drift_clips;
                substeps += p.counters.substeps;
                steps += p.counters.steps;
                max_step = std::max(max_step, p.counters.max_step);
                per_path.push_back({{"path_id", p.index},
                                    {"status", to_string(p.status)},
                                    {"xi", p.xi ? num(*p.xi) : json()},
                                    {"steps", p.counters.steps},
                                    {"drift_clips", p.counters.drift_clips},
                                    {"substeps", p.counters.substeps},
                                    {"min_boundary_distance", num(p.counters.min_boundary_distance)},
                                    {"note", p.note}});
            }
            const bool valid = 100 * unresolved <= paths.size();
            json warnings = json::array();
            if (clips > 0)
                warnings.push_back(std::to_string(clips) + " drift evaluations clipped");
            if (unresolved > 0)
                warnings.push_back(std::to_string(unresolved) + " unresolved paths");
            if (!valid)
                warnings.push_back("more than 1% of paths unresolved: ensemble unreliable");
            r["summary"] = {{"n_paths", paths.size()},
                            {"exited", exited},
                            {"survived", paths.size() - exited - unresolved},
                            {"unresolved", unresolved},
                            {"drift_clips", clips},
                            {"substeps", substeps},
                            {"steps", steps},
                            {"max_step", max_step},
                            {"valid", valid},
                            {"warnings", warnings}};
            r["paths"] = per_path;
            out.valid = valid;

            if (!cfg.output.paths)
                return;
            std::ostringstream csv;
            csv << "path_id,t";
            for (std::size_t i = 1; i <= c.spec.dim; ++i)
                csv << ",x_" << i;
            csv << ",alive\n";
            const double s = c.setup.start.t;
            for (const auto &p : paths)
            {
                const std::size_t last = p.size() - 1;
                for (std::size_t k = 0; k <= last; ++k)
                {
                    if (k % cfg.output.stride != 0 && k != last)
                        continue;
                    csv << p.index << ',' << csv_number(s + p.times[k]);
                    const auto x = p.state(k);
                    for (Eigen::Index i = 0; i < x.size(); ++i)
                        csv << ',' << csv_number(x[i]);
                    csv << ",1\n";
                }
                if (p.cemetery())
                {
                    csv << p.index << ',' << csv_number(s + *p.xi);
                    for (std::size_t i = 0; i < c.spec.dim; ++i)
                        csv << ",nan";
                    csv << ",0\n";
                }
            }
            out.paths_csv = csv.str();
        }

        void push_report(json &reports, MonteCarloReport rep, const std::string &digest, bool &valid)
        {
            rep.config_digest = digest;
            valid = valid && rep.valid;
            reports.push_back(to_json(rep));
        }

        void cmd_lifetime(const RunConfig &cfg, Context &c, CommandResult &out, json &r)
        {
            json reports = json::array();
            const LifetimeSummary s = lifetime_statistics(c.setup);
            push_report(reports, s.explosion, c.digest, out.valid);
            push_report(reports, s.mean_exited_xi, c.digest, out.valid);
            push_report(reports, s.mean_censored_xi, c.digest, out.valid);
            if (!cfg.lifetime.horizons.empty())
            {
                for (auto &rep : explosion_probability_curve(c.setup, cfg.lifetime.horizons))
                    push_report(reports, rep, c.digest, out.valid);
            }
            r["reports"] = reports;
        }

        void cmd_moments(const RunConfig &cfg, Context &c, CommandResult &out, json &r)
        {
            json reports = json::array();
            const TerminalMoments m = terminal_moments(c.setup, cfg.moments.coordinate);
            push_report(reports, m.mean, c.digest, out.valid);
            push_report(reports, m.variance, c.digest, out.valid);
            if (cfg.moments.sup_exp)
            {
                require_potential(c, "moments.sup_exp");
                const TheoremConstants k = theorem_constants(cfg.epsilon, cfg.K1, cfg.K, cfg.horizon);
                push_report(reports, sup_exp_moment(c.setup, k), c.digest, out.valid);
            }
            ScalarField g;
            if (cfg.moments.exp_g == "grad-phi")
            {
                const PotentialField pot = require_potential(c, "moments.exp_g = grad-phi");
                g = [pot](double t, const Vector &x) { return pot.grad_phi(t, x).norm(); };
            }
            else
            {
                g = [](double, const Vector &x) { return x.norm(); };
            }
            MonteCarloReport e = exp_functional(c.setup, g, cfg.moments.exp_kappa);
            e.extras["g"] = cfg.moments.exp_g;
            push_report(reports, e, c.digest, out.valid);
            r["reports"] = reports;
        }

        void cmd_krylov(const RunConfig &cfg, Context &c, CommandResult &out, json &r)
        {
            std::vector<KrylovFunction> family;
            for (const auto &m : cfg.krylov.members)
            {
                KrylovFunction f;
                f.name = m.name;
                f.lo = m.lo;
                f.hi = m.hi;
                f.f = [m](double t, const Vector &x) {
                    if (!(t >= m.t_lo && t < m.t_hi))
                        return 0.0;
                    for (Eigen::Index i = 0; i < x.size(); ++i)
                    {
                        const auto k = static_cast<std::size_t>(i);
                        if (!(x[i] > m.lo[k] && x[i] < m.hi[k]))
                            return 0.0;
                    }
                    return m.scale;
                };
                family.push_back(std::move(f));
            }
            const KrylovResult k =
                krylov_ratio(c.setup, family, cfg.krylov.S, cfg.krylov.p, cfg.krylov.q, cfg.krylov.norm_resolution);
            json reports = json::array();
            for (const auto &rep : k.members)
                push_report(reports, rep, c.digest, out.valid);
            r["reports"] = reports;
            r["max_ratio"] = num(k.max_ratio);
        }

        void cmd_runs(const RunConfig &cfg, Context &c, CommandResult &out, json &r)
        {
            json reports = json::array();
            push_report(reports, run_moment(c.setup, cfg.runs.n_level, cfg.runs.alpha), c.digest, out.valid);
            r["reports"] = reports;
        }

        void cmd_girsanov(const RunConfig &cfg, Context &c, CommandResult &out, json &r)
        {
            VectorField b2;
            const double v = cfg.girsanov.value;
            const std::size_t d = c.spec.dim;
            if (cfg.girsanov.b2 == "model")
                b2 = c.spec.alt_drift;
            else if (cfg.girsanov.b2 == "linear")
                b2 = [v](double, const Vector &x) -> Vector { return v * x; };
            else
                b2 = [v, d](double, const Vector &) -> Vector {
                    return Vector::Constant(static_cast<Eigen::Index>(d), v);
                };
            const auto coord = static_cast<Eigen::Index>(cfg.girsanov.coordinate);
            const GirsanovCheck g =
                girsanov_check(c.setup, b2, [coord](double, const Vector &x) { return x[coord]; });
            json reports = json::array();
            push_report(reports, g.weight_mean, c.digest, out.valid);
            push_report(reports, g.reweighted, c.digest, out.valid);
            push_report(reports, g.direct, c.digest, out.valid);
            r["reports"] = reports;
            r["z_weight"] = num(g.z_weight);
            r["z_cross"] = num(g.z_cross);
        }

        void cmd_check_lyapunov(const RunConfig &cfg, Context &c, CommandResult &, json &r)
        {
            const Region level = c.domain->exhaustion_level(cfg.lyapunov.level);
            const std::size_t grid = cfg.lyapunov.grid;
            json certs = json::array();
            const DiffusionField &diff = c.spec.coeffs.diffusion;
            certs.push_back(certificate_json(check_ellipticity(diff, level, grid, diff.declared)));
            certs.push_back(certificate_json(check_lipschitz_a(diff, level, grid)));
            const std::optional<ScalarField> h = configured_h(cfg, c);
            if (c.spec.coeffs.potential)
            {
                const PotentialField &pot = *c.spec.coeffs.potential;
                certs.push_back(certificate_json(check_drift_condition(pot, level, grid, cfg.K1)));
                certs.push_back(certificate_json(check_elliptic_condition(
                    pot, diff, level, grid, cfg.lyapunov.moll_width, c.domain.get(), h, cfg.epsilon)));
                r["h_calibrated"] = num(
                    calibrate_h_constant(pot, diff, level, grid, cfg.lyapunov.moll_width, cfg.epsilon, c.domain.get()));
            }
            if (h)
                certs.push_back(certificate_json(check_condition_h(*h, *c.domain, cfg.horizon, cfg.lyapunov.h_a,
                                                                   cfg.lyapunov.h_r, cfg.lyapunov.h_samples,
                                                                   cfg.seed)));
            r["region"] = level.label();
            r["certificates"] = certs;
        }

        void cmd_norm(const RunConfig &cfg, Context &c, CommandResult &, json &r)
        {
            const Region level = c.domain->exhaustion_level(cfg.norm.level);
            const BoundingBox &box = level.box();
            if (!box.finite())
                throw ConfigError("norm: exhaustion level has an unbounded box");
            auto mixed = [&](const std::string &field, const ScalarField &f) {
                const MixedNorm n = lp_lq_norm(f, box.t_lo, box.t_hi, box.lo, box.hi, cfg.norm.p, cfg.norm.q,
                                               cfg.norm.resolution);
                return json{{"field", field},   {"value", num(n.value)}, {"S", n.S},   {"T", n.T},
                            {"lo", n.lo},       {"hi", n.hi},            {"p", n.p},   {"q", n.q},
                            {"grid_resolution", n.grid_resolution}};
            };
            json norms = json::array();
            if (c.spec.coeffs.potential)
            {
                const PotentialField pot = *c.spec.coeffs.potential;
                norms.push_back(mixed("grad-phi", [pot, &level](double t, const Vector &x) {
                    if (!level.contains(SpaceTimePoint{t, x}))
                        return 0.0;
                    return pot.grad_phi(t, x).norm();
                }));
            }
            const DiffusionField diff = c.spec.coeffs.diffusion;
            if (diff.has_jacobian())
            {
                norms.push_back(mixed("grad-sigma", [diff, &level](double t, const Vector &x) {
                    if (!level.contains(SpaceTimePoint{t, x}))
                        return 0.0;
                    double s = 0.0;
                    for (const Matrix &m : diff.jacobian(t, x))
                        s += m.squaredNorm();
                    return std::sqrt(s);
                }));
            }
            r["region"] = level.label();
            r["norms"] = norms;
        }

        void cmd_constants(const RunConfig &cfg, Context &, CommandResult &, json &r)
        {
            const TheoremConstants k = theorem_constants(cfg.epsilon, cfg.K1, cfg.K, cfg.horizon);
            r["constants"] = {{"epsilon", k.epsilon}, {"K1", k.K1}, {"K", k.K},   {"T", k.T},
                              {"delta", k.delta},     {"mu", k.mu}, {"nu", k.nu}};
        }

        using Handler = void (*)(const RunConfig &, Context &, CommandResult &, json &);

        const std::vector<std::pair<std::string, Handler>> &handlers()
        {
            static const std::vector<std::pair<std::string, Handler>> table = {
                {"simulate", cmd_simulate}, {"lifetime", cmd_lifetime},
                {"moments", cmd_moments},   {"check-lyapunov", cmd_check_lyapunov},
                {"krylov", cmd_krylov},     {"runs", cmd_runs},
                {"girsanov", cmd_girsanov}, {"norm", cmd_norm},
                {"constants", cmd_constants},
            };
            return table;
        }
    }

    std::vector<std::string> subcommands()
    {
        std::vector<std::string> names;
        for (const auto &h : handlers())
            names.push_back(h.first);
        return names;
    }

    CommandResult execute(const std::string &command, const RunConfig &config)
    {
        Handler handler = nullptr;
        for (const auto &h : handlers())
        {
            if (h.first == command)
                handler = h.second;
        }
        if (!handler)
            throw ConfigError("unknown subcommand '" + command + "'");

        Context ctx = make_context(config);
        CommandResult out;
        json r;
        r["schema_version"] = kReportSchemaVersion;
        r["version"] = kToolkitVersion;
        r["command"] = command;
        r["config_digest"] = ctx.digest;
        r["seed"] = config.seed;
        r["config"] = digest_view(config);
        r["warnings"] = ctx.spec.warnings;
        if (!ctx.spec.info.empty())
            r["model_info"] = ctx.spec.info;
        handler(config, ctx, out, r);
        r["valid"] = out.valid;
        out.report = std::move(r);
        return out;
    }

    std::string report_text(const json &report) { return report.dump(2) + "\n"; }

    int run(const std::string &command, const RunConfig &config, std::ostream &log)
    {
        const CommandResult result = execute(command, config);
        const std::filesystem::path dir(config.output.dir);
        std::filesystem::create_directories(dir);
        {
            std::ofstream f(dir / "report.json", std::ios::binary | std::ios::trunc);
            f << report_text(result.report);
            if (!f)
                throw std::runtime_error("cannot write " + (dir / "report.json").string());
        }
        log << "wrote " << (dir / "report.json").string() << "\n";
        if (!result.paths_csv.empty())
        {
            std::ofstream f(dir / "paths.csv", std::ios::binary | std::ios::trunc);
            f << result.paths_csv;
            if (!f)
                throw std::runtime_error("cannot write " + (dir / "paths.csv").string());
            log << "wrote " << (dir / "paths.csv").string() << "\n";
        }
        if (!result.valid)
        {
            log << "report marked invalid; see warnings in report.json\n";
            return kExitInvalidReport;
        }
        return kExitOk;
    }
}
