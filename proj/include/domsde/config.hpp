#pragma once

#include "domsde/integrate.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace domsde
{
    inline constexpr const char *kToolkitVersion = "domsde 1.0.0";
    inline constexpr int kReportSchemaVersion = 1;

    struct OutputOptions
    {
        std::string dir = "out";
        bool paths = true;       // write paths.csv (simulate only)
        std::size_t stride = 1;  // keep every stride-th grid point; the terminal row is always kept
    };

    struct LifetimeOptions
    {
        /// Extra nested horizons for the explosion-probability curve (each <= horizon).
        std::vector<double> horizons;
    };

    struct MomentsOptions
    {
        std::size_t coordinate = 0;
        /// Also estimate E sup exp(mu phi + mu nu |x|^2) (gradient-type models only).
        bool sup_exp = true;
        /// E exp(kappa int |g|^2) with g = |x| ("x") or |grad phi| ("grad-phi").
        double exp_kappa = 0.0;
        std::string exp_g = "x";
    };

    /// f = scale * indicator of [t_lo, t_hi) x prod [lo_i, hi_i).
    struct KrylovMember
    {
        std::string name;
        double scale = 1.0;
        double t_lo = 0.0;
        double t_hi = 1.0;
        std::vector<double> lo;
        std::vector<double> hi;
    };

    struct KrylovOptions
    {
        double S = 0.0;
        double p = 4.0;
        double q = 4.0;
        std::size_t norm_resolution = 256;
        std::vector<KrylovMember> members;
    };

    struct RunsOptions
    {
        int n_level = 1;
        double alpha = 0.25;
    };

    struct GirsanovOptions
    {
        /// "model" (the model's alternative drift), "linear" (b2 = value * x) or "constant" (b2 = value).
        std::string b2 = "model";
        double value = 0.0;
        std::size_t coordinate = 0; // f(x) = x_coordinate
    };

    struct LyapunovOptions
    {
        int level = 2;
        std::size_t grid = 32;
        double moll_width = 0.02;
        /// Condition (H) integral: int h^r e^{-a |x|^2} over Q x (0, T).
        double h_a = 1.0;
        double h_r = 1.5;
        std::size_t h_samples = 20000;
    };

    struct NormOptions
    {
        int level = 2;
        double p = 4.0;
        double q = 4.0;
        std::size_t resolution = 64;
    };

    struct RunConfig
    {
        std::string model;
        nlohmann::json model_params = nlohmann::json::object(); // fully defaulted by the model factory
        nlohmann::json domain;                                  // null: the model's own domain
        double start_t = 0.0;
        std::vector<double> start_x;                            // defaults to the model's start
        double horizon = 1.0;
        std::uint64_t seed = 0;
        std::size_t n_paths = 1000;
        std::size_t workers = 1;
        StepPolicy policy;
        OutputOptions output;

        // Lyapunov parameters; defaults come from the model's declared data.
        double epsilon = 0.0;
        double K1 = 0.0;
        double K = 1.0;
        std::optional<double> h; // constant h; null means the model's declared h

        LifetimeOptions lifetime;
        MomentsOptions moments;
        KrylovOptions krylov;
        RunsOptions runs;
        GirsanovOptions girsanov;
        LyapunovOptions lyapunov;
        NormOptions norm;
    };

    /// Parses YAML text into a fully defaulted RunConfig. Unknown keys, malformed values and
    /// out-of-range parameters raise ConfigError with the offending key in the message.
    RunConfig parse_config(const std::string &text);
    RunConfig load_config(const std::string &path);

    /// Canonical JSON form (sorted keys, every default present).
    nlohmann::json to_json(const RunConfig &config);
    /// Canonical text; it is valid YAML, so parse_config(serialize(c)) reproduces c.
    std::string serialize(const RunConfig &config);
    /// Canonical form without the keys that cannot change results (workers, output.dir).
    nlohmann::json digest_view(const RunConfig &config);
    /// Hex SHA-256 of digest_view(config).dump().
    std::string config_digest(const RunConfig &config);

    bool operator==(const RunConfig &a, const RunConfig &b);
}
