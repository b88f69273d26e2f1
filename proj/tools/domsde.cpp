#include "domsde/app.hpp"
#include "domsde/types.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

int main(int argc, char **argv)
{
    CLI::App app{"Simulation and diagnostics for SDEs with singular coefficients on space-time domains"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> out_dir;
    std::optional<bool> paths;

    const std::map<std::string, std::string> about{
        {"simulate", "simulate the path ensemble; per-path summary and paths.csv"},
        {"lifetime", "P(xi <= T), E[xi | xi <= T] and E[xi ^ T]"},
        {"moments", "terminal mean and variance, sup-exponential moment, exponential functional"},
        {"check-lyapunov", "grid certificates for ellipticity, Lipschitz a, drift and elliptic conditions, (H)"},
        {"krylov", "Krylov ratios E int |f| / ||f|| over the configured family"},
        {"runs", "moment E nu^alpha of the run count between two exhaustion levels"},
        {"girsanov", "Girsanov weight mean and reweighted-vs-direct cross-check"},
        {"norm", "mixed L^q_p norms of |grad phi| and |grad sigma| on an exhaustion level"},
        {"constants", "delta, mu and nu of the moment bound"},
    };
    for (const std::string &name : domsde::subcommands())
    {
        const auto it = about.find(name);
        CLI::App *sub = app.add_subcommand(name, it == about.end() ? std::string{} : it->second);
        sub->add_option("-c,--config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--workers", workers, "worker threads (results do not depend on it)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_flag("--paths,!--no-paths", paths, "write paths.csv (simulate)");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try
    {
        domsde::RunConfig config = domsde::load_config(config_path);
        if (seed)
            config.seed = *seed;
        if (workers)
            config.workers = *workers;
        if (out_dir)
            config.output.dir = *out_dir;
        if (paths)
            config.output.paths = *paths;
        return domsde::run(command, config, std::cerr);
    }
    catch (const std::exception &e)
    {
        std::cerr << "domsde " << command << ": " << e.what() << "\n";
        return domsde::kExitError;
    }
}
