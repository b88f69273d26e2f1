#pragma once

#include "domsde/coeffs.hpp"
#include "domsde/domain.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace domsde
{
    struct Capabilities
    {
        bool analytic_gradient = false;
        bool analytic_jacobian = false;
        bool oracle_available = false;
    };

    struct ModelSpec
    {
        std::string name;
        std::size_t dim = 0;
        DomainPtr domain;
        CoefficientSet coeffs;
        nlohmann::json params = nlohmann::json::object(); // fully defaulted parameter record
        nlohmann::json info = nlohmann::json::object();   // derived quantities, never parameters
        Capabilities caps;
        Vector default_start;
        /// Second drift of a Girsanov pair (girsanov-toy only).
        VectorField alt_drift;
        std::vector<std::string> warnings;

        bool gradient_type() const noexcept { return coeffs.provenance == Provenance::gradient_type; }
        const PotentialField &potential() const;
    };

    // Diffusion families. All carry analytic jacobians.
    DiffusionField sigma_constant(std::size_t dim, double value);
    /// diag(2 + sin x_i)
    DiffusionField sigma_sine(std::size_t dim);
    /// diag((1 + x_i^2)^{-1})
    DiffusionField sigma_inverse_square(std::size_t dim);
    /// ln(2 + |x|^2) I
    DiffusionField sigma_log(std::size_t dim);
    /// Block-diagonal lift diag(sigma(x^(1)), ..., sigma(x^(M))) of a d-dimensional field.
    DiffusionField sigma_block(const DiffusionField &base, std::size_t particles);
    /// Family by name: "constant" (uses `value`), "sine", "inverse-square", "log".
    DiffusionField make_sigma(const std::string &family, std::size_t dim, double value = 1.0);

    /// Radial pair potential V(y) with gradient.
    struct PairPotential
    {
        std::string family;
        std::function<double(const Vector &)> V;
        std::function<Vector(const Vector &)> grad;
        /// Dominating profile U(y) = C (1 + |y|^2)^{-alpha} of |V| + |grad V|, when known.
        std::function<double(double r)> envelope;
        double core = 0.0; // V blows up as |y| -> core (0 for non-singular families)
    };

    /// C (1 + |y|^2)^{-alpha}
    PairPotential power_law_potential(double C, double alpha);
    /// A (|y| - rho)^{-beta} + lambda |y|
    PairPotential hard_core_potential(double A, double beta, double lambda, double rho);
    /// k |y|^2
    PairPotential harmonic_potential(double k);
    PairPotential make_pair_potential(const nlohmann::json &spec);

    ModelSpec make_example_611();
    ModelSpec make_example_612();
    ModelSpec make_example_62(double delta, double h_constant = 1.0);

    struct RandomMediaOptions
    {
        std::vector<Vector> gamma;
        double rho = 0.0;
        PairPotential V;
        DiffusionField sigma;
        /// Impurities farther than this from the origin are dropped (inf keeps all).
        double cutoff_radius = kInf;
    };

    ModelSpec make_random_media(const RandomMediaOptions &options);

    struct AdmissibilityResult
    {
        double r = 0.0;
        bool pass = true;
        std::size_t worst_count = 0; // |gamma n B_r(x)| at the worst sampled x
        Vector worst_x;
        double worst_bound = 0.0;    // c log(1 + |worst_x|)
    };

    /// Samples |gamma n B_r(x)| <= c log(1 + |x|) at the given points x, for each r.
    std::vector<AdmissibilityResult> admissibility_check(const std::vector<Vector> &gamma, double c,
                                                         const std::vector<double> &radii,
                                                         const std::vector<Vector> &samples);
    /// Sample points: a regular grid of `per_axis` nodes per axis over the bounding box of gamma,
    /// origin excluded (the bound degenerates to 0 there).
    std::vector<Vector> admissibility_samples(const std::vector<Vector> &gamma, std::size_t per_axis);

    /// Upper bound on |grad phi| contributed at x by impurities beyond the cutoff radius,
    /// via the envelope |grad V(y)| <= U(|y|).
    double tail_gradient_bound(const std::vector<Vector> &dropped, const PairPotential &V, const Vector &x);

    struct ParticleOptions
    {
        std::size_t particles = 2;
        std::size_t dim = 1;
        PairPotential V;
        DiffusionField sigma; // d-dimensional single-particle field
        double C = 1.0;       // U(y) = C (1 + |y|^2)
    };

    ModelSpec make_particle_system(const ParticleOptions &options);

    ModelSpec make_brownian(std::size_t dim = 1);
    ModelSpec make_ou(std::size_t dim = 1);
    ModelSpec make_bessel_drift();
    /// b1 = 0 (model drift), b2 = theta (alt_drift), sigma = I.
    ModelSpec make_girsanov_toy(double theta = 0.7, std::size_t dim = 1);
    std::vector<ModelSpec> make_validation_toys();

    std::vector<std::string> builtin_model_names();
    /// Builds a builtin by name from a parameter record; unknown parameters raise ConfigError
    /// naming the key. The returned ModelSpec's params are fully defaulted.
    ModelSpec make_model(const std::string &name, const nlohmann::json &params = nlohmann::json::object());

    /// Domain from a config descriptor {type: box | halfspace | slab | punctured-plane | product, params: ...}.
    DomainPtr make_domain(const nlohmann::json &descriptor);
}
