#include "domsde/config.hpp"

#include "domsde/models.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace domsde
{
    using nlohmann::json;

    namespace
    {
        json yaml_scalar(const YAML::Node &node)
        {
            const std::string &s = node.Scalar();
            if (node.Tag() == "!") // quoted
                return s;
            if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL")
                return nullptr;
            if (s == "true" || s == "True" || s == "TRUE")
                return true;
            if (s == "false" || s == "False" || s == "FALSE")
                return false;
            if (s == ".inf" || s == ".Inf" || s == "+.inf" || s == "inf")
                return std::numeric_limits<double>::infinity();
            if (s == "-.inf" || s == "-.Inf" || s == "-inf")
                return -std::numeric_limits<double>::infinity();
            {
                std::size_t used = 0;
                try
                {
                    if (s.find_first_of(".eE") == std::string::npos)
                    {
                        if (s[0] == '-')
                        {
                            const long long v = std::stoll(s, &used);
                            if (used == s.size())
                                return v;
                        }
                        else
                        {
                            const unsigned long long v = std::stoull(s, &used);
                            if (used == s.size())
                                return v;
                        }
                    }
                    const double v = std::stod(s, &used);
                    if (used == s.size())
                        return v;
                }
                catch (const std::exception &)
                {
                }
            }
            return s;
        }

        json yaml_to_json(const YAML::Node &node)
        {
            switch (node.Type())
            {
            case YAML::NodeType::Null:
            case YAML::NodeType::Undefined:
                return nullptr;
            case YAML::NodeType::Scalar:
                return yaml_scalar(node);
            case YAML::NodeType::Sequence: {
                json a = json::array();
                for (const auto &item : node)
                    a.push_back(yaml_to_json(item));
                return a;
            }
            case YAML::NodeType::Map: {
                json o = json::object();
                for (const auto &kv : node)
                {
                    const std::string key = kv.first.as<std::string>();
                    if (o.contains(key))
                        throw ConfigError("duplicate config key '" + key + "'");
                    o[key] = yaml_to_json(kv.second);
                }
                return o;
            }
            }
            return nullptr;
        }

        /// Typed access to one config table; finish() rejects keys never read.
        class Table
        {
        public:
            Table(const json &j, std::string path) : j_(j), path_(std::move(path))
            {
                if (!j_.is_null() && !j_.is_object())
                    throw ConfigError("config key '" + path_ + "' must be a table");
            }

            bool has(const std::string &key) const { return j_.is_object() && j_.contains(key) && !j_.at(key).is_null(); }

            const json *get(const std::string &key)
            {
                seen_.insert(key);
                if (!has(key))
                    return nullptr;
                return &j_.at(key);
            }

            std::string name(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

            double number(const std::string &key, double fallback)
            {
                const json *v = get(key);
                if (!v)
                    return fallback;
                if (v->is_string())
                {
                    const std::string s = v->get<std::string>();
                    if (s == ".inf" || s == "inf")
                        return std::numeric_limits<double>::infinity();
                    if (s == "-.inf" || s == "-inf")
                        return -std::numeric_limits<double>::infinity();
                }
                if (!v->is_number())
                    throw ConfigError("config key '" + name(key) + "' must be a number");
                return v->get<double>();
            }

            std::optional<double> optional_number(const std::string &key)
            {
                if (!has(key))
                {
                    seen_.insert(key);
                    return std::nullopt;
                }
                return number(key, 0.0);
            }

            std::uint64_t count(const std::string &key, std::uint64_t fallback)
            {
                const json *v = get(key);
                if (!v)
                    return fallback;
                if (v->is_number_unsigned())
                    return v->get<std::uint64_t>();
                if (v->is_number_integer() && v->get<long long>() >= 0)
                    return static_cast<std::uint64_t>(v->get<long long>());
                throw ConfigError("config key '" + name(key) + "' must be a nonnegative integer");
            }

            int integer(const std::string &key, int fallback)
            {
                const json *v = get(key);
                if (!v)
                    return fallback;
                if (!v->is_number_integer())
                    throw ConfigError("config key '" + name(key) + "' must be an integer");
                return v->get<int>();
            }

            bool boolean(const std::string &key, bool fallback)
            {
                const json *v = get(key);
                if (!v)
                    return fallback;
                if (!v->is_boolean())
                    throw ConfigError("config key '" + name(key) + "' must be true or false");
                return v->get<bool>();
            }

            std::string text(const std::string &key, const std::string &fallback)
            {
                const json *v = get(key);
                if (!v)
                    return fallback;
                if (!v->is_string())
                    throw ConfigError("config key '" + name(key) + "' must be a string");
                return v->get<std::string>();
            }

            std::vector<double> numbers(const std::string &key, const std::vector<double> &fallback)
            {
                const json *v = get(key);
                if (!v)
                    return fallback;
                if (v->is_number())
                    return {v->get<double>()};
                if (!v->is_array())
                    throw ConfigError("config key '" + name(key) + "' must be a list of numbers");
                std::vector<double> out;
                for (const auto &e : *v)
                {
                    if (!e.is_number())
                        throw ConfigError("config key '" + name(key) + "' must be a list of numbers");
                    out.push_back(e.get<double>());
                }
                return out;
            }

            json raw(const std::string &key)
            {
                const json *v = get(key);
                return v ? *v : json();
            }

            Table table(const std::string &key)
            {
                const json *v = get(key);
                return Table(v ? *v : json(), name(key));
            }

            void finish() const
            {
                if (!j_.is_object())
                    return;
                for (const auto &kv : j_.items())
                {
                    if (!seen_.count(kv.key()))
                        throw ConfigError("unknown config key '" + name(kv.key()) + "'");
                }
            }

        private:
            json j_;
            std::string path_;
            std::set<std::string> seen_;
        };

        void require(bool ok, const std::string &message)
        {
            if (!ok)
                throw ConfigError(message);
        }

        std::string format_number(double v)
        {
            std::ostringstream os;
            os << std::setprecision(17) << v;
            return os.str();
        }

        StepPolicy parse_policy(Table t)
        {
            StepPolicy p;
            p.dt_max = t.number("dt_max", p.dt_max);
            p.dt_min = t.number("dt_min", std::min(p.dt_min, p.dt_max));
            p.c1 = t.number("c1", p.c1);
            p.c2 = t.number("c2", p.c2);
            p.tol_xi = t.number("tol_xi", p.tol_xi);
            p.b_max = t.number("b_max", p.b_max);
            p.clip_cap = t.count("clip_cap", p.clip_cap);
            p.max_steps = t.count("max_steps", p.max_steps);
            t.finish();
            p.validate();
            return p;
        }

        json policy_json(const StepPolicy &p)
        {
            return {{"dt_max", p.dt_max}, {"dt_min", p.dt_min}, {"c1", p.c1},         {"c2", p.c2},
                    {"tol_xi", p.tol_xi}, {"b_max", p.b_max},   {"clip_cap", p.clip_cap}, {"max_steps", p.max_steps}};
        }

        /// Non-finite numbers have no JSON literal; they are written as YAML's .inf / -.inf strings
        /// and read back by the scalar converter.
        json finite_or_tag(double v)
        {
            if (std::isfinite(v))
                return v;
            return v > 0 ? ".inf" : "-.inf";
        }

        json sanitize(const json &j)
        {
            if (j.is_number_float())
                return finite_or_tag(j.get<double>());
            if (j.is_array() || j.is_object())
            {
                json out = j;
                for (auto &e : out)
                    e = sanitize(e);
                return out;
            }
            return j;
        }

        double declared_K(const ModelSpec &spec)
        {
            const auto &decl = spec.coeffs.diffusion.declared;
            if (!decl || !(decl->lower > 0.0) || !std::isfinite(decl->upper))
                return 1.0;
            return std::max({1.0, decl->upper, 1.0 / decl->lower});
        }
    }

    RunConfig parse_config(const std::string &text)
    {
        json root;
        try
        {
            root = yaml_to_json(YAML::Load(text));
        }
        catch (const YAML::Exception &e)
        {
            throw ConfigError(std::string("malformed config: ") + e.what());
        }
        if (root.is_null())
            root = json::object();
        Table top(root, "");
        RunConfig c;

        // Model: a bare name or {name, params}.
        const json model = top.raw("model");
        json params = json::object();
        if (model.is_string())
        {
            c.model = model.get<std::string>();
        }
        else if (model.is_object())
        {
            Table m(model, "model");
            c.model = m.text("name", "");
            const json p = m.raw("params");
            if (!p.is_null())
                params = p;
            m.finish();
        }
        require(!c.model.empty(), "config key 'model' is required");
        const ModelSpec spec = make_model(c.model, params);
        c.model_params = spec.params;

        c.domain = top.raw("domain");
        DomainPtr domain = spec.domain;
        if (!c.domain.is_null())
        {
            domain = make_domain(c.domain);
            require(domain->dim() == spec.dim, "config key 'domain' has dimension " + std::to_string(domain->dim()) +
                                                   " but the model has " + std::to_string(spec.dim));
        }

        if (top.has("start"))
        {
            const json s = top.raw("start");
            if (s.is_object())
            {
                Table st(s, "start");
                c.start_t = st.number("t", 0.0);
                c.start_x = st.numbers("x", {});
                st.finish();
            }
            else
            {
                Table wrap(json{{"start", s}}, "");
                c.start_x = wrap.numbers("start", {});
            }
        }
        if (c.start_x.empty())
            c.start_x.assign(spec.default_start.data(), spec.default_start.data() + spec.default_start.size());
        require(c.start_x.size() == spec.dim, "config key 'start' has " + std::to_string(c.start_x.size()) +
                                                  " coordinates but the model dimension is " +
                                                  std::to_string(spec.dim));
        require(c.start_t >= 0.0 && std::isfinite(c.start_t), "config key 'start.t' must be finite and >= 0");
        {
            const Vector x0 = Eigen::Map<const Vector>(c.start_x.data(), static_cast<Eigen::Index>(c.start_x.size()));
            require(domain->contains({c.start_t, x0}), "config key 'start' lies outside the domain Q");
        }

        c.horizon = top.number("horizon", c.horizon);
        require(c.horizon > 0.0 && std::isfinite(c.horizon), "config key 'horizon' must be finite and positive");
        c.seed = top.count("seed", c.seed);
        c.n_paths = top.count("n_paths", c.n_paths);
        require(c.n_paths > 0, "config key 'n_paths' must be positive");
        c.workers = top.count("workers", c.workers);
        require(c.workers > 0, "config key 'workers' must be positive");
        c.policy = parse_policy(top.table("policy"));

        {
            Table o = top.table("output");
            c.output.dir = o.text("dir", c.output.dir);
            c.output.paths = o.boolean("paths", c.output.paths);
            c.output.stride = o.count("stride", c.output.stride);
            require(c.output.stride > 0, "config key 'output.stride' must be positive");
            o.finish();
        }

        const auto &lyap = spec.coeffs.potential ? spec.coeffs.potential->lyapunov : std::nullopt;
        c.epsilon = top.number("epsilon", lyap ? lyap->epsilon : 0.0);
        if (!(c.epsilon >= 0.0 && c.epsilon < 2.0))
            throw DomainConstraintError("config key 'epsilon' must lie in [0,2), got " + format_number(c.epsilon));
        c.K1 = top.number("K1", lyap ? lyap->K1 : 0.0);
        require(c.K1 >= 0.0, "config key 'K1' must be >= 0");
        c.K = top.number("K", declared_K(spec));
        require(c.K > 0.0, "config key 'K' must be positive");
        c.h = top.optional_number("h");
        require(!c.h || *c.h >= 0.0, "config key 'h' must be >= 0");

        {
            Table t = top.table("lifetime");
            c.lifetime.horizons = t.numbers("horizons", {});
            for (double h : c.lifetime.horizons)
                require(h > 0.0 && h <= c.horizon, "config key 'lifetime.horizons' entries must lie in (0, horizon]");
            t.finish();
        }
        {
            Table t = top.table("moments");
            c.moments.coordinate = t.count("coordinate", 0);
            require(c.moments.coordinate < spec.dim, "config key 'moments.coordinate' exceeds the model dimension");
            c.moments.sup_exp = t.boolean("sup_exp", spec.gradient_type());
            c.moments.exp_kappa = t.number("exp_kappa", 0.0);
            c.moments.exp_g = t.text("exp_g", "x");
            require(c.moments.exp_g == "x" || c.moments.exp_g == "grad-phi",
                    "config key 'moments.exp_g' must be \"x\" or \"grad-phi\"");
            require(!c.moments.sup_exp || spec.gradient_type(),
                    "config key 'moments.sup_exp' requires a gradient-type model");
            t.finish();
        }
        {
            Table t = top.table("krylov");
            c.krylov.S = t.number("S", 0.0);
            require(c.krylov.S >= 0.0 && c.krylov.S < c.horizon, "config key 'krylov.S' must lie in [0, horizon)");
            c.krylov.p = t.number("p", 4.0);
            c.krylov.q = t.number("q", 4.0);
            require(c.krylov.p >= 1.0 && c.krylov.q >= 1.0, "config keys 'krylov.p' and 'krylov.q' must be >= 1");
            c.krylov.norm_resolution = t.count("norm_resolution", 256);
            require(c.krylov.norm_resolution > 0, "config key 'krylov.norm_resolution' must be positive");
            const json members = t.raw("members");
            if (members.is_null())
            {
                KrylovMember m;
                m.name = "unit-box";
                m.lo.assign(spec.dim, -1.0);
                m.hi.assign(spec.dim, 1.0);
                c.krylov.members.push_back(m);
            }
            else
            {
                require(members.is_array() && !members.empty(), "config key 'krylov.members' must be a nonempty list");
                for (std::size_t i = 0; i < members.size(); ++i)
                {
                    Table mt(members[i], "krylov.members[" + std::to_string(i) + "]");
                    KrylovMember m;
                    m.name = mt.text("name", "member-" + std::to_string(i));
                    m.scale = mt.number("scale", 1.0);
                    m.t_lo = mt.number("t_lo", 0.0);
                    m.t_hi = mt.number("t_hi", 1.0);
                    m.lo = mt.numbers("lo", std::vector<double>(spec.dim, -1.0));
                    m.hi = mt.numbers("hi", std::vector<double>(spec.dim, 1.0));
                    mt.finish();
                    require(m.scale > 0.0, "krylov member scale must be positive");
                    require(m.t_lo < m.t_hi, "krylov member needs t_lo < t_hi");
                    require(m.lo.size() == spec.dim && m.hi.size() == spec.dim,
                            "krylov member box must have one bound per dimension");
                    for (std::size_t k = 0; k < spec.dim; ++k)
                        require(m.lo[k] < m.hi[k], "krylov member box needs lo < hi");
                    c.krylov.members.push_back(m);
                }
            }
            t.finish();
        }
        {
            Table t = top.table("runs");
            c.runs.n_level = t.integer("n_level", 1);
            require(c.runs.n_level >= 1, "config key 'runs.n_level' must be >= 1");
            c.runs.alpha = t.number("alpha", 0.25);
            require(c.runs.alpha >= 0.0 && c.runs.alpha < 0.5, "config key 'runs.alpha' must lie in [0, 1/2)");
            t.finish();
        }
        {
            Table t = top.table("girsanov");
            c.girsanov.b2 = t.text("b2", spec.alt_drift ? "model" : "linear");
            c.girsanov.value = t.number("value", c.girsanov.b2 == "linear" ? -1.0 : 0.0);
            c.girsanov.coordinate = t.count("coordinate", 0);
            require(c.girsanov.b2 == "model" || c.girsanov.b2 == "linear" || c.girsanov.b2 == "constant",
                    "config key 'girsanov.b2' must be \"model\", \"linear\" or \"constant\"");
            require(c.girsanov.b2 != "model" || static_cast<bool>(spec.alt_drift),
                    "config key 'girsanov.b2' is \"model\" but the model has no alternative drift");
            require(c.girsanov.coordinate < spec.dim, "config key 'girsanov.coordinate' exceeds the model dimension");
            t.finish();
        }
        {
            Table t = top.table("lyapunov");
            c.lyapunov.level = t.integer("level", 2);
            require(c.lyapunov.level >= 1, "config key 'lyapunov.level' must be >= 1");
            c.lyapunov.grid = t.count("grid", 32);
            require(c.lyapunov.grid >= 2, "config key 'lyapunov.grid' must be >= 2");
            c.lyapunov.moll_width = t.number("moll_width", 0.02);
            require(c.lyapunov.moll_width > 0.0, "config key 'lyapunov.moll_width' must be positive");
            c.lyapunov.h_a = t.number("h_a", 1.0);
            c.lyapunov.h_r = t.number("h_r", 1.5);
            c.lyapunov.h_samples = t.count("h_samples", 20000);
            require(c.lyapunov.h_a > 0.0 && c.lyapunov.h_samples > 1,
                    "config keys 'lyapunov.h_a' and 'lyapunov.h_samples' must be positive (h_samples >= 2)");
            require(c.lyapunov.h_r > 1.0, "config key 'lyapunov.h_r' must exceed 1");
            t.finish();
        }
        {
            Table t = top.table("norm");
            c.norm.level = t.integer("level", 2);
            require(c.norm.level >= 1, "config key 'norm.level' must be >= 1");
            c.norm.p = t.number("p", 4.0);
            c.norm.q = t.number("q", 4.0);
            require(c.norm.p >= 1.0 && c.norm.q >= 1.0, "config keys 'norm.p' and 'norm.q' must be >= 1");
            c.norm.resolution = t.count("resolution", 64);
            require(c.norm.resolution > 0, "config key 'norm.resolution' must be positive");
            t.finish();
        }

        top.finish();
        return c;
    }

    RunConfig load_config(const std::string &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError("cannot read config file '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str());
    }

    json to_json(const RunConfig &c)
    {
        json members = json::array();
        for (const auto &m : c.krylov.members)
            members.push_back({{"name", m.name}, {"scale", m.scale}, {"t_lo", m.t_lo}, {"t_hi", m.t_hi},
                               {"lo", m.lo},     {"hi", m.hi}});
        json j = {
            {"model", {{"name", c.model}, {"params", c.model_params}}},
            {"domain", c.domain},
            {"start", {{"t", c.start_t}, {"x", c.start_x}}},
            {"horizon", c.horizon},
            {"seed", c.seed},
            {"n_paths", c.n_paths},
            {"workers", c.workers},
            {"policy", policy_json(c.policy)},
            {"output", {{"dir", c.output.dir}, {"paths", c.output.paths}, {"stride", c.output.stride}}},
            {"epsilon", c.epsilon},
            {"K1", c.K1},
            {"K", c.K},
            {"h", c.h ? json(*c.h) : json()},
            {"lifetime", {{"horizons", c.lifetime.horizons}}},
            {"moments",
             {{"coordinate", c.moments.coordinate},
              {"sup_exp", c.moments.sup_exp},
              {"exp_kappa", c.moments.exp_kappa},
              {"exp_g", c.moments.exp_g}}},
            {"krylov",
             {{"S", c.krylov.S},
              {"p", c.krylov.p},
              {"q", c.krylov.q},
              {"norm_resolution", c.krylov.norm_resolution},
              {"members", members}}},
            {"runs", {{"n_level", c.runs.n_level}, {"alpha", c.runs.alpha}}},
            {"girsanov", {{"b2", c.girsanov.b2}, {"value", c.girsanov.value}, {"coordinate", c.girsanov.coordinate}}},
            {"lyapunov",
             {{"level", c.lyapunov.level},
              {"grid", c.lyapunov.grid},
              {"moll_width", c.lyapunov.moll_width},
              {"h_a", c.lyapunov.h_a},
              {"h_r", c.lyapunov.h_r},
              {"h_samples", c.lyapunov.h_samples}}},
            {"norm",
             {{"level", c.norm.level}, {"p", c.norm.p}, {"q", c.norm.q}, {"resolution", c.norm.resolution}}},
        };
        return sanitize(j);
    }

    std::string serialize(const RunConfig &config) { return to_json(config).dump(2) + "\n"; }

    json digest_view(const RunConfig &config)
    {
        json j = to_json(config);
        j.erase("workers");
        j["output"].erase("dir");
        return j;
    }

    std::string config_digest(const RunConfig &config)
    {
        const std::string text = digest_view(config).dump();
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("SHA-256 digest failed");
        std::ostringstream os;
        for (unsigned int i = 0; i < len; ++i)
            os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
        return os.str();
    }

    bool operator==(const RunConfig &a, const RunConfig &b) { return to_json(a) == to_json(b); }
}
