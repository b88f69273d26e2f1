#include "domsde/models.hpp"

#include "domsde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace domsde
{
    using nlohmann::json;

    const PotentialField &ModelSpec::potential() const
    {
        if (!coeffs.potential)
            throw PreconditionError("model " + name + " is not gradient-type and carries no potential");
        return *coeffs.potential;
    }

    // --- diffusion families ------------------------------------------------------

    DiffusionField sigma_constant(std::size_t dim, double value)
    {
        const auto d = static_cast<Eigen::Index>(dim);
        DiffusionField f;
        f.dim = dim;
        f.sigma = [d, value](double, const Vector &) -> Matrix { return value * Matrix::Identity(d, d); };
        f.jacobian = [d](double, const Vector &) {
            return std::vector<Matrix>(static_cast<std::size_t>(d), Matrix::Zero(d, d));
        };
        const double v2 = value * value;
        if (v2 > 0.0)
            f.declared = Ellipticity{v2, v2};
        return f;
    }

    DiffusionField sigma_sine(std::size_t dim)
    {
        const auto d = static_cast<Eigen::Index>(dim);
        DiffusionField f;
        f.dim = dim;
        f.sigma = [](double, const Vector &x) -> Matrix {
            return (2.0 + x.array().sin()).matrix().asDiagonal();
        };
        f.jacobian = [d](double, const Vector &x) {
            std::vector<Matrix> js(static_cast<std::size_t>(d), Matrix::Zero(d, d));
            for (Eigen::Index k = 0; k < d; ++k)
                js[static_cast<std::size_t>(k)](k, k) = std::cos(x[k]);
            return js;
        };
        f.declared = Ellipticity{1.0, 9.0};
        return f;
    }

    DiffusionField sigma_inverse_square(std::size_t dim)
    {
        const auto d = static_cast<Eigen::Index>(dim);
        DiffusionField f;
        f.dim = dim;
        f.sigma = [](double, const Vector &x) -> Matrix {
            return (1.0 / (1.0 + x.array().square())).matrix().asDiagonal();
        };
        f.jacobian = [d](double, const Vector &x) {
            std::vector<Matrix> js(static_cast<std::size_t>(d), Matrix::Zero(d, d));
            for (Eigen::Index k = 0; k < d; ++k)
            {
                const double q = 1.0 + x[k] * x[k];
                js[static_cast<std::size_t>(k)](k, k) = -2.0 * x[k] / (q * q);
            }
            return js;
        };
        return f;
    }

    DiffusionField sigma_log(std::size_t dim)
    {
        const auto d = static_cast<Eigen::Index>(dim);
        DiffusionField f;
        f.dim = dim;
        f.sigma = [d](double, const Vector &x) -> Matrix {
            return std::log(2.0 + x.squaredNorm()) * Matrix::Identity(d, d);
        };
        f.jacobian = [d](double, const Vector &x) {
            const double q = 2.0 + x.squaredNorm();
            std::vector<Matrix> js;
            js.reserve(static_cast<std::size_t>(d));
            for (Eigen::Index k = 0; k < d; ++k)
                js.push_back((2.0 * x[k] / q) * Matrix::Identity(d, d));
            return js;
        };
        return f;
    }

    DiffusionField sigma_block(const DiffusionField &base, std::size_t particles)
    {
        const std::size_t d = base.dim;
        const auto dd = static_cast<Eigen::Index>(d);
        const auto total = static_cast<Eigen::Index>(d * particles);
        DiffusionField f;
        f.dim = d * particles;
        f.sigma = [base, particles, dd, total](double t, const Vector &x) -> Matrix {
            Matrix s = Matrix::Zero(total, total);
            for (std::size_t k = 0; k < particles; ++k)
            {
                const auto off = static_cast<Eigen::Index>(k) * dd;
                s.block(off, off, dd, dd) = base.sigma(t, x.segment(off, dd));
            }
            return s;
        };
        if (base.has_jacobian())
        {
            f.jacobian = [base, particles, dd, total](double t, const Vector &x) {
                std::vector<Matrix> js(static_cast<std::size_t>(total), Matrix::Zero(total, total));
                for (std::size_t k = 0; k < particles; ++k)
                {
                    const auto off = static_cast<Eigen::Index>(k) * dd;
                    const std::vector<Matrix> local = base.jacobian(t, x.segment(off, dd));
                    for (Eigen::Index r = 0; r < dd; ++r)
                        js[static_cast<std::size_t>(off + r)].block(off, off, dd, dd) = local[static_cast<std::size_t>(r)];
                }
                return js;
            };
        }
        f.declared = base.declared;
        return f;
    }

    DiffusionField make_sigma(const std::string &family, std::size_t dim, double value)
    {
        if (family == "constant")
            return sigma_constant(dim, value);
        if (family == "sine")
            return sigma_sine(dim);
        if (family == "inverse-square")
            return sigma_inverse_square(dim);
        if (family == "log")
            return sigma_log(dim);
        throw ConfigError("unknown sigma family '" + family + "' (expected constant, sine, inverse-square, log)");
    }

    // --- pair potentials ---------------------------------------------------------

    PairPotential power_law_potential(double C, double alpha)
    {
        if (!(alpha > 0.0) || !(C >= 0.0))
            throw ConfigError("power-law potential requires C >= 0 and alpha > 0");
        PairPotential v;
        v.family = "power-law";
        v.V = [C, alpha](const Vector &y) { return C * std::pow(1.0 + y.squaredNorm(), -alpha); };
        v.grad = [C, alpha](const Vector &y) -> Vector {
            return (-2.0 * alpha * C * std::pow(1.0 + y.squaredNorm(), -alpha - 1.0)) * y;
        };
        // |V| + |grad V| <= C (1 + 2 alpha) (1 + r^2)^{-alpha}
        v.envelope = [C, alpha](double r) { return C * (1.0 + 2.0 * alpha) * std::pow(1.0 + r * r, -alpha); };
        return v;
    }

    PairPotential hard_core_potential(double A, double beta, double lambda, double rho)
    {
        if (!(A > 0.0) || !(beta > 0.0) || !(rho >= 0.0))
            throw ConfigError("hard-core potential requires A > 0, beta > 0, rho >= 0");
        PairPotential v;
        v.family = "hard-core";
        v.core = rho;
        v.V = [A, beta, lambda, rho](const Vector &y) {
            const double r = y.norm();
            return A * std::pow(r - rho, -beta) + lambda * r;
        };
        v.grad = [A, beta, lambda, rho](const Vector &y) -> Vector {
            const double r = y.norm();
            const double dv = -beta * A * std::pow(r - rho, -beta - 1.0) + lambda;
            return (dv / r) * y;
        };
        return v;
    }

    PairPotential harmonic_potential(double k)
    {
        PairPotential v;
        v.family = "harmonic";
        v.V = [k](const Vector &y) { return k * y.squaredNorm(); };
        v.grad = [k](const Vector &y) -> Vector { return 2.0 * k * y; };
        return v;
    }

    namespace
    {
        /// Reads keys from a JSON object, remembering which were consumed.
        class ParamReader
        {
        public:
            ParamReader(const json &params, std::string where) : params_(params), where_(std::move(where))
            {
                if (!params_.is_object())
                    throw ConfigError(where_ + ": parameters must be a table");
            }

            double number(const std::string &key, double fallback)
            {
                used_.insert(key);
                out_[key] = fallback;
                if (!params_.contains(key))
                    return fallback;
                const json &v = params_.at(key);
                if (!v.is_number())
                    throw ConfigError(where_ + ": parameter '" + key + "' must be a number");
                out_[key] = v.get<double>();
                return v.get<double>();
            }

            std::optional<double> optional_number(const std::string &key)
            {
                used_.insert(key);
                if (!params_.contains(key))
                    return std::nullopt;
                return number(key, 0.0);
            }

            std::size_t count(const std::string &key, std::size_t fallback)
            {
                const double v = number(key, static_cast<double>(fallback));
                if (!(v >= 0.0) || std::floor(v) != v)
                    throw ConfigError(where_ + ": parameter '" + key + "' must be a nonnegative integer");
                out_[key] = static_cast<std::size_t>(v);
                return static_cast<std::size_t>(v);
            }

            std::string text(const std::string &key, const std::string &fallback)
            {
                used_.insert(key);
                std::string v = fallback;
                if (params_.contains(key))
                {
                    if (!params_.at(key).is_string())
                        throw ConfigError(where_ + ": parameter '" + key + "' must be a string");
                    v = params_.at(key).get<std::string>();
                }
                out_[key] = v;
                return v;
            }

            const json *raw(const std::string &key)
            {
                used_.insert(key);
                return params_.contains(key) ? &params_.at(key) : nullptr;
            }

            void set(const std::string &key, json value) { out_[key] = std::move(value); }

            json finish() const
            {
                for (const auto &item : params_.items())
                {
                    if (!used_.count(item.key()))
                        throw ConfigError(where_ + ": unknown parameter '" + item.key() + "'");
                }
                return out_;
            }

        private:
            const json &params_;
            std::string where_;
            std::set<std::string> used_;
            json out_ = json::object();
        };

        Vector to_vector(const json &v, const std::string &what)
        {
            if (!v.is_array())
                throw ConfigError(what + " must be a list of numbers");
            Vector out(static_cast<Eigen::Index>(v.size()));
            for (std::size_t i = 0; i < v.size(); ++i)
            {
                if (!v[i].is_number())
                    throw ConfigError(what + " must be a list of numbers");
                out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
            }
            return out;
        }

        json from_vector(const Vector &v)
        {
            json out = json::array();
            for (Eigen::Index i = 0; i < v.size(); ++i)
                out.push_back(v[i]);
            return out;
        }

        void require_finite_gradient(const Vector &g, double t, const Vector &x)
        {
            if (!g.allFinite())
                throw SingularityError(SpaceTimePoint{t, x}, "non-finite potential gradient");
        }

        DiffusionField sigma_from(const json *spec, std::size_t dim, json &record)
        {
            json s = spec ? *spec : json::object();
            ParamReader r(s, "sigma");
            const std::string family = r.text("family", "constant");
            const double value = r.number("value", 1.0);
            record = r.finish();
            if (family != "constant")
                record.erase("value");
            return make_sigma(family, dim, value);
        }
    }

    PairPotential make_pair_potential(const json &spec)
    {
        ParamReader r(spec, "V");
        const std::string family = r.text("family", "power-law");
        PairPotential v;
        if (family == "power-law")
        {
            const double C = r.number("C", 1.0);
            const double alpha = r.number("alpha", 2.0);
            v = power_law_potential(C, alpha);
        }
        else if (family == "hard-core")
        {
            const double A = r.number("A", 1.0);
            const double beta = r.number("beta", 1.0);
            const double lambda = r.number("lambda", 0.0);
            const double rho = r.number("rho", 0.0);
            v = hard_core_potential(A, beta, lambda, rho);
        }
        else if (family == "harmonic")
        {
            v = harmonic_potential(r.number("k", 1.0));
        }
        else
        {
            throw ConfigError("unknown V family '" + family + "' (expected power-law, hard-core, harmonic)");
        }
        r.finish();
        return v;
    }

    // --- worked examples ---------------------------------------------------------

    ModelSpec make_example_611()
    {
        ModelSpec m;
        m.name = "example-6-1-1";
        m.dim = 1;
        m.domain = make_half_line();
        m.coeffs = make_direct_coefficients(
            1, [](double, const Vector &x) -> Vector { return Vector::Constant(1, -1.0 / x[0]); },
            sigma_inverse_square(1));
        m.caps = {false, true, false};
        m.default_start = Vector::Constant(1, 1.0);
        return m;
    }

    ModelSpec make_example_612()
    {
        ModelSpec m;
        m.name = "example-6-1-2";
        m.dim = 2;
        m.domain = make_punctured(2, 0, 0.0);
        m.coeffs = make_direct_coefficients(
            2, [](double, const Vector &x) -> Vector { return x * std::log(std::abs(x[0])); }, sigma_log(2));
        m.caps = {false, true, false};
        m.default_start = Vector::Constant(2, 1.0);
        return m;
    }

    ModelSpec make_example_62(double delta, double h_constant)
    {
        if (!(delta > 0.0))
            throw DomainConstraintError("example-6-2 requires delta > 0");
        if (!(h_constant >= 0.0))
            throw DomainConstraintError("example-6-2 requires h >= 0");
        ModelSpec m;
        m.name = "example-6-2";
        m.dim = 1;
        m.domain = make_half_line();

        PotentialField pot;
        pot.phi = [delta](double, const Vector &x) {
            const double r = std::abs(x[0]);
            return std::pow(r, -delta) + r;
        };
        pot.grad_phi = [delta](double t, const Vector &x) -> Vector {
            const double r = std::abs(x[0]);
            if (r < 1e-12)
                throw SingularityError(SpaceTimePoint{t, x}, "potential singular at the origin");
            Vector g(1);
            g[0] = -delta * x[0] * std::pow(r, -delta - 2.0) + x[0] / r;
            require_finite_gradient(g, t, x);
            return g;
        };
        pot.dt_phi = [](double, const Vector &) { return 0.0; };
        pot.lyapunov = LyapunovData{[h_constant](double, const Vector &) { return h_constant; }, 1.5, 0.0};

        m.coeffs = make_gradient_coefficients(pot, sigma_sine(1), m.domain);
        m.caps = {true, true, false};
        m.params = {{"delta", delta}, {"h", h_constant}};
        m.default_start = Vector::Constant(1, 1.0);
        return m;
    }

    // --- random media ------------------------------------------------------------

    ModelSpec make_random_media(const RandomMediaOptions &options)
    {
        const std::size_t d = options.sigma.dim;
        if (d == 0)
            throw ConfigError("random-media requires a diffusion field");
        std::vector<Vector> kept, dropped;
        for (const Vector &y : options.gamma)
        {
            if (static_cast<std::size_t>(y.size()) != d)
                throw DimensionError(d, static_cast<std::size_t>(y.size()));
            (y.norm() <= options.cutoff_radius ? kept : dropped).push_back(y);
        }
        if (options.rho < options.V.core)
            throw ConfigError("random-media requires rho >= the core radius of V");

        ModelSpec m;
        m.name = "random-media";
        m.dim = d;
        m.domain = make_point_exclusion(d, kept, options.rho);

        const PairPotential V = options.V;
        const double guard = std::max(options.rho, V.core);
        PotentialField pot;
        pot.phi = [kept, V](double, const Vector &x) {
            double s = 0.0;
            for (const Vector &y : kept)
                s += V.V(x - y);
            return s;
        };
        pot.grad_phi = [kept, V, guard](double t, const Vector &x) -> Vector {
            Vector g = Vector::Zero(x.size());
            for (const Vector &y : kept)
            {
                const Vector z = x - y;
                if (z.norm() - guard < 1e-12)
                    throw SingularityError(SpaceTimePoint{t, x}, "on top of an impurity");
                g += V.grad(z);
            }
            require_finite_gradient(g, t, x);
            return g;
        };
        pot.dt_phi = [](double, const Vector &) { return 0.0; };
        pot.analytic_gradient = true;

        m.coeffs = make_gradient_coefficients(pot, options.sigma, m.domain);
        m.caps = {true, options.sigma.has_jacobian(), false};
        m.default_start = Vector::Zero(static_cast<Eigen::Index>(d));
        if (!dropped.empty())
        {
            if (V.envelope)
            {
                const double bound = tail_gradient_bound(dropped, V, m.default_start);
                m.info["tail_gradient_bound_at_origin"] = bound;
            }
            else
            {
                m.warnings.push_back("V has no U-domination envelope; truncation tail is unbounded");
            }
            m.info["dropped_impurities"] = dropped.size();
        }
        m.info["impurities"] = kept.size();
        return m;
    }

    std::vector<AdmissibilityResult> admissibility_check(const std::vector<Vector> &gamma, double c,
                                                         const std::vector<double> &radii,
                                                         const std::vector<Vector> &samples)
    {
        std::vector<AdmissibilityResult> out;
        for (double r : radii)
        {
            AdmissibilityResult res;
            res.r = r;
            double worst_excess = -kInf;
            for (const Vector &x : samples)
            {
                std::size_t n = 0;
                for (const Vector &y : gamma)
                {
                    if ((y - x).norm() < r)
                        ++n;
                }
                const double bound = c * std::log1p(x.norm());
                const double excess = static_cast<double>(n) - bound;
                if (excess > worst_excess)
                {
                    worst_excess = excess;
                    res.worst_count = n;
                    res.worst_x = x;
                    res.worst_bound = bound;
                }
                if (static_cast<double>(n) > bound)
                    res.pass = false;
            }
            out.push_back(res);
        }
        return out;
    }

    std::vector<Vector> admissibility_samples(const std::vector<Vector> &gamma, std::size_t per_axis)
    {
        if (gamma.empty() || per_axis < 2)
            return {};
        const auto d = gamma.front().size();
        Vector lo = gamma.front(), hi = gamma.front();
        for (const Vector &y : gamma)
        {
            lo = lo.cwiseMin(y);
            hi = hi.cwiseMax(y);
        }
        std::size_t total = 1;
        for (Eigen::Index i = 0; i < d; ++i)
            total *= per_axis;
        std::vector<Vector> out;
        out.reserve(total);
        for (std::size_t idx = 0; idx < total; ++idx)
        {
            Vector x(d);
            std::size_t rest = idx;
            for (Eigen::Index i = 0; i < d; ++i)
            {
                const std::size_t k = rest % per_axis;
                rest /= per_axis;
                x[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(k) / static_cast<double>(per_axis - 1);
            }
            if (x.norm() > 0.0)
                out.push_back(std::move(x));
        }
        return out;
    }

    double tail_gradient_bound(const std::vector<Vector> &dropped, const PairPotential &V, const Vector &x)
    {
        if (!V.envelope)
            return kInf;
        double s = 0.0;
        for (const Vector &y : dropped)
            s += V.envelope((x - y).norm());
        return s;
    }

    // --- particle systems --------------------------------------------------------

    ModelSpec make_particle_system(const ParticleOptions &options)
    {
        const std::size_t M = options.particles;
        const std::size_t d = options.dim;
        if (M < 2)
            throw ConfigError("particle system requires M >= 2, got " + std::to_string(M));
        if (options.sigma.dim != d)
            throw DimensionError(d, options.sigma.dim);
        const auto dd = static_cast<Eigen::Index>(d);
        const double C = options.C;
        const PairPotential V = options.V;
        const DiffusionField base = options.sigma;

        ModelSpec m;
        m.name = "particles";
        m.dim = M * d;
        m.domain = make_collision_free(M, d);

        // phi_bar = sum_{k<j} V(x^k - x^j) + 2 U(x^k - x^j), U(y) = C (1 + |y|^2)
        PotentialField pot;
        pot.phi = [M, dd, V, C](double, const Vector &x) {
            double s = 0.0;
            for (std::size_t k = 0; k < M; ++k)
                for (std::size_t j = k + 1; j < M; ++j)
                {
                    const Vector y = x.segment(static_cast<Eigen::Index>(k) * dd, dd) -
                                     x.segment(static_cast<Eigen::Index>(j) * dd, dd);
                    s += V.V(y) + 2.0 * C * (1.0 + y.squaredNorm());
                }
            return s;
        };
        pot.grad_phi = [M, dd, V, C](double t, const Vector &x) -> Vector {
            Vector g = Vector::Zero(x.size());
            for (std::size_t k = 0; k < M; ++k)
                for (std::size_t j = k + 1; j < M; ++j)
                {
                    const auto ok = static_cast<Eigen::Index>(k) * dd;
                    const auto oj = static_cast<Eigen::Index>(j) * dd;
                    const Vector y = x.segment(ok, dd) - x.segment(oj, dd);
                    if (V.core > 0.0 || V.family == "hard-core")
                    {
                        if (y.norm() - V.core < 1e-12)
                            throw SingularityError(SpaceTimePoint{t, x}, "particle collision");
                    }
                    const Vector f = V.grad(y) + 4.0 * C * y;
                    g.segment(ok, dd) += f;
                    g.segment(oj, dd) -= f;
                }
            require_finite_gradient(g, t, x);
            return g;
        };
        pot.dt_phi = [](double, const Vector &) { return 0.0; };

        // b^(k) = 4 C a(x^k) sum_{j != k} (x^k - x^j)
        VectorField extra = [M, dd, base, C](double t, const Vector &x) -> Vector {
            Vector b = Vector::Zero(x.size());
            for (std::size_t k = 0; k < M; ++k)
            {
                const auto ok = static_cast<Eigen::Index>(k) * dd;
                Vector s = Vector::Zero(dd);
                for (std::size_t j = 0; j < M; ++j)
                {
                    if (j != k)
                        s += x.segment(ok, dd) - x.segment(static_cast<Eigen::Index>(j) * dd, dd);
                }
                b.segment(ok, dd) = 4.0 * C * (base.a(t, x.segment(ok, dd)) * s);
            }
            return b;
        };

        m.coeffs = make_gradient_coefficients(pot, sigma_block(base, M), m.domain, extra);
        m.caps = {true, base.has_jacobian(), false};
        Vector start(static_cast<Eigen::Index>(M * d));
        for (std::size_t k = 0; k < M; ++k)
            start.segment(static_cast<Eigen::Index>(k) * dd, dd).setConstant(static_cast<double>(k));
        m.default_start = start;
        return m;
    }

    // --- validation toys ---------------------------------------------------------

    ModelSpec make_brownian(std::size_t dim)
    {
        const auto d = static_cast<Eigen::Index>(dim);
        ModelSpec m;
        m.name = "bm";
        m.dim = dim;
        m.domain = make_full_space(dim);
        m.coeffs = make_direct_coefficients(
            dim, [d](double, const Vector &) -> Vector { return Vector::Zero(d); }, sigma_constant(dim, 1.0));
        m.caps = {false, true, true};
        m.params = {{"dim", dim}};
        m.default_start = Vector::Zero(d);
        return m;
    }

    ModelSpec make_ou(std::size_t dim)
    {
        ModelSpec m;
        m.name = "ou";
        m.dim = dim;
        m.domain = make_full_space(dim);
        PotentialField pot;
        pot.phi = [](double, const Vector &x) { return 0.5 * x.squaredNorm(); };
        pot.grad_phi = [](double, const Vector &x) -> Vector { return x; };
        pot.dt_phi = [](double, const Vector &) { return 0.0; };
        m.coeffs = make_gradient_coefficients(pot, sigma_constant(dim, 1.0), m.domain);
        m.caps = {true, true, true};
        m.params = {{"dim", dim}};
        m.default_start = Vector::Constant(static_cast<Eigen::Index>(dim), 1.0);
        return m;
    }

    ModelSpec make_bessel_drift()
    {
        ModelSpec m;
        m.name = "bessel-drift";
        m.dim = 1;
        m.domain = make_half_line();
        m.coeffs = make_direct_coefficients(
            1, [](double, const Vector &x) -> Vector { return Vector::Constant(1, -1.0 / x[0]); },
            sigma_constant(1, 1.0));
        m.caps = {false, true, true};
        m.default_start = Vector::Constant(1, 1.0);
        return m;
    }

    ModelSpec make_girsanov_toy(double theta, std::size_t dim)
    {
        const auto d = static_cast<Eigen::Index>(dim);
        ModelSpec m;
        m.name = "girsanov-toy";
        m.dim = dim;
        m.domain = make_full_space(dim);
        m.coeffs = make_direct_coefficients(
            dim, [d](double, const Vector &) -> Vector { return Vector::Zero(d); }, sigma_constant(dim, 1.0));
        m.alt_drift = [d, theta](double, const Vector &) -> Vector { return Vector::Constant(d, theta); };
        m.caps = {false, true, true};
        m.params = {{"theta", theta}, {"dim", dim}};
        m.default_start = Vector::Zero(d);
        return m;
    }

    std::vector<ModelSpec> make_validation_toys()
    {
        return {make_brownian(1), make_ou(1), make_bessel_drift(), make_girsanov_toy(0.7, 1)};
    }

    std::vector<std::string> builtin_model_names()
    {
        return {"example-6-1-1", "example-6-1-2", "example-6-2", "random-media", "particles",
                "bm",            "ou",            "bessel-drift", "girsanov-toy"};
    }

    ModelSpec make_model(const std::string &name, const json &params)
    {
        ParamReader r(params, "model '" + name + "'");
        ModelSpec m;
        if (name == "example-6-1-1")
            m = make_example_611();
        else if (name == "example-6-1-2")
            m = make_example_612();
        else if (name == "example-6-2")
        {
            const double delta = r.number("delta", 0.5);
            const double h = r.number("h", 1.0);
            m = make_example_62(delta, h);
        }
        else if (name == "bm")
            m = make_brownian(r.count("dim", 1));
        else if (name == "ou")
            m = make_ou(r.count("dim", 1));
        else if (name == "bessel-drift")
            m = make_bessel_drift();
        else if (name == "girsanov-toy")
        {
            const double theta = r.number("theta", 0.7);
            m = make_girsanov_toy(theta, r.count("dim", 1));
        }
        else if (name == "random-media")
        {
            const std::size_t d = r.count("dim", 2);
            RandomMediaOptions o;
            o.rho = r.number("rho", 0.0);
            if (auto cut = r.optional_number("cutoff_radius"))
                o.cutoff_radius = *cut;
            json vrec = json::object();
            if (const json *v = r.raw("V"))
                vrec = *v;
            o.V = make_pair_potential(vrec);
            r.set("V", vrec);
            json srec;
            o.sigma = sigma_from(r.raw("sigma"), d, srec);
            r.set("sigma", srec);

            json gamma = json::array();
            if (const json *g = r.raw("gamma"))
            {
                if (g->is_array())
                {
                    for (const auto &pt : *g)
                        o.gamma.push_back(to_vector(pt, "gamma point"));
                }
                else if (g->is_object())
                {
                    // Poisson configuration {intensity, half_width, seed} in the cube [-w, w]^d.
                    ParamReader pr(*g, "gamma");
                    const double lambda = pr.number("intensity", 0.01);
                    const double w = pr.number("half_width", 10.0);
                    const auto seed = static_cast<std::uint64_t>(pr.count("seed", 0));
                    pr.finish();
                    auto eng = make_stream(seed, 0, StreamTag::sampling);
                    const double volume = std::pow(2.0 * w, static_cast<double>(d));
                    std::poisson_distribution<std::size_t> count(lambda * volume);
                    const std::size_t n = count(eng);
                    for (std::size_t i = 0; i < n; ++i)
                    {
                        Vector y(static_cast<Eigen::Index>(d));
                        for (auto &c : y)
                            c = -w + 2.0 * w * std::generate_canonical<double, 64>(eng);
                        o.gamma.push_back(y);
                    }
                }
                else
                {
                    throw ConfigError("random-media gamma must be a list of points or a Poisson table");
                }
            }
            for (const Vector &y : o.gamma)
            {
                if (static_cast<std::size_t>(y.size()) != d)
                    throw DimensionError(d, static_cast<std::size_t>(y.size()));
                gamma.push_back(from_vector(y));
            }
            r.set("gamma", gamma);

            double adm_c = 1.0;
            std::vector<double> radii;
            if (const json *a = r.raw("admissibility"))
            {
                ParamReader ar(*a, "admissibility");
                adm_c = ar.number("c", 1.0);
                if (const json *rs = ar.raw("radii"))
                {
                    const Vector rv = to_vector(*rs, "admissibility radii");
                    radii.assign(rv.data(), rv.data() + rv.size());
                }
                ar.set("radii", radii);
                r.set("admissibility", ar.finish());
            }
            json record = r.finish();
            m = make_random_media(o);
            m.params = record;
            if (!radii.empty())
            {
                for (const auto &res : admissibility_check(o.gamma, adm_c, radii, admissibility_samples(o.gamma, 21)))
                {
                    if (!res.pass)
                        m.warnings.push_back("configuration not admissible at r = " + std::to_string(res.r) + ": " +
                                             std::to_string(res.worst_count) + " impurities in a ball where " +
                                             "c log(1+|x|) = " + std::to_string(res.worst_bound));
                }
            }
            return m;
        }
        else if (name == "particles")
        {
            ParticleOptions o;
            o.particles = r.count("M", 2);
            o.dim = r.count("d", 1);
            o.C = r.number("C", 1.0);
            json vrec = json::object();
            if (const json *v = r.raw("V"))
                vrec = *v;
            else
                vrec = {{"family", "hard-core"}};
            o.V = make_pair_potential(vrec);
            r.set("V", vrec);
            json srec;
            o.sigma = sigma_from(r.raw("sigma"), o.dim, srec);
            r.set("sigma", srec);
            m = make_particle_system(o);
        }
        else
        {
            throw ConfigError("unknown model '" + name + "'");
        }
        json record = r.finish();
        for (const auto &item : m.params.items())
        {
            if (!record.contains(item.key()))
                record[item.key()] = item.value();
        }
        m.params = record;
        return m;
    }

    DomainPtr make_domain(const json &descriptor)
    {
        if (!descriptor.is_object() || !descriptor.contains("type") || !descriptor.at("type").is_string())
            throw ConfigError("domain descriptor requires a string 'type'");
        for (const auto &item : descriptor.items())
        {
            if (item.key() != "type" && item.key() != "params")
                throw ConfigError("domain: unknown key '" + item.key() + "'");
        }
        const std::string type = descriptor.at("type").get<std::string>();
        const json params = descriptor.contains("params") ? descriptor.at("params") : json::object();
        ParamReader r(params, "domain '" + type + "'");

        auto vec = [&](const std::string &key) -> Vector {
            const json *v = r.raw(key);
            if (!v)
                throw ConfigError("domain '" + type + "': missing parameter '" + key + "'");
            return to_vector(*v, "domain parameter '" + key + "'");
        };
        auto stdvec = [](const Vector &v) { return std::vector<double>(v.data(), v.data() + v.size()); };

        DomainPtr out;
        if (type == "box")
        {
            const Vector lo = vec("lo"), hi = vec("hi");
            const double t_max = r.number("t_max", kInf);
            out = make_box(stdvec(lo), stdvec(hi), t_max);
        }
        else if (type == "halfspace")
        {
            const Vector n = vec("normal");
            const double offset = r.number("offset", 0.0);
            const double t_max = r.number("t_max", kInf);
            out = make_halfspace(n, offset, t_max);
        }
        else if (type == "slab")
        {
            const Vector n = vec("normal");
            const double lo = r.number("lo", -1.0), hi = r.number("hi", 1.0);
            const double t_max = r.number("t_max", kInf);
            out = make_slab(n, lo, hi, t_max);
        }
        else if (type == "punctured-plane")
        {
            const std::size_t dim = r.count("dim", 2);
            const std::size_t axis = r.count("axis", 0);
            const double value = r.number("value", 0.0);
            const double t_max = r.number("t_max", kInf);
            out = make_punctured(dim, axis, value, t_max);
        }
        else if (type == "full-space")
        {
            const std::size_t dim = r.count("dim", 1);
            const double t_max = r.number("t_max", kInf);
            out = make_full_space(dim, t_max);
        }
        else if (type == "half-line")
        {
            out = make_half_line();
        }
        else if (type == "product")
        {
            const json *f = r.raw("factors");
            if (!f || !f->is_array() || f->empty())
                throw ConfigError("domain 'product': 'factors' must be a non-empty list of domain descriptors");
            std::vector<DomainPtr> factors;
            for (const auto &item : *f)
                factors.push_back(make_domain(item));
            out = make_product(factors);
        }
        else
        {
            throw ConfigError("unknown domain type '" + type +
                              "' (expected box, halfspace, slab, punctured-plane, full-space, half-line, product)");
        }
        r.finish();
        return out;
    }
}
