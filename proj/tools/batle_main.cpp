// batle: treatment-effect estimation with an unlabeled source-domain.
//
//   batle run         --config sweep.json --out results/ [--jobs N]
//   batle gen-gwas    --config gwas.json --out data/ [--seed S]
//   batle gen-hcmnist --mnist mnist/ --config hcmnist.json --out data/ [--seed S]
//   batle aipw        --data target.csv [--folds K] [--seed S]
//
// Exit codes: 0 success, 2 configuration error, 3 at least one sweep run failed.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "batle/batle.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir, std::size_t jobs) {
    batle::ExperimentConfig cfg = batle::parse_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (jobs > 0) cfg.jobs = jobs;
    if (cfg.out_dir.empty()) throw batle::ConfigError("config: --out (or config key 'out') is required");

    const batle::SweepResult sweep = batle::run_experiment(cfg);
    std::size_t failed = 0;
    for (const auto& r : sweep.runs)
        if (r.status != "ok") ++failed;
    std::cout << "runs: " << sweep.runs.size() << ", failed: " << failed << "\n";
    for (const auto& a : sweep.aggregates) {
        std::cout << a.method << " r=" << batle::format_double(a.ratio) << " B=" << a.stats.count
                  << " mean_mae=" << batle::format_double(a.stats.mean_mae) << " ci=["
                  << batle::format_double(a.stats.ci_low) << ", "
                  << batle::format_double(a.stats.ci_high) << "]\n";
    }
    std::cout << "results written to " << cfg.out_dir << "\n";
    return sweep.any_failed ? 3 : 0;
}

int cmd_gen_gwas(const std::string& config_path, const std::string& out_dir, std::uint64_t seed) {
    batle::GwasConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw batle::ConfigError("cannot open " + config_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw batle::ConfigError(std::string("invalid JSON: ") + e.what());
        }
        batle::detail::parse_gwas(j, cfg);
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw batle::ConfigError(e.what());
    }
    fs::create_directories(out_dir);
    batle::RngStream rng(seed);
    const batle::GwasResult res = batle::simulate_gwas(cfg, rng);
    batle::write_domain_csv((fs::path(out_dir) / "target.csv").string(), res.dataset);
    nlohmann::json echo = batle::gwas_config_json(cfg);
    echo["seed"] = seed;
    batle::write_ground_truth_json((fs::path(out_dir) / "ground_truth.json").string(),
                                   *res.dataset.ground_truth, echo);
    std::cout << "gwas dataset: " << res.dataset.n() << " rows, " << res.dataset.dim()
              << " covariates, tau=" << batle::format_double(res.tau) << "\n";
    std::cout << "written to " << out_dir << "\n";
    return 0;
}

int cmd_gen_hcmnist(const std::string& mnist_dir, const std::string& config_path,
                    const std::string& out_dir, std::uint64_t seed) {
    batle::HcmnistConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw batle::ConfigError("cannot open " + config_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw batle::ConfigError(std::string("invalid JSON: ") + e.what());
        }
        batle::detail::parse_hcmnist(j, cfg);
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw batle::ConfigError(e.what());
    }
    const batle::ImageSet images =
        batle::load_idx((fs::path(mnist_dir) / "train-images-idx3-ubyte").string(),
                        (fs::path(mnist_dir) / "train-labels-idx1-ubyte").string());
    fs::create_directories(out_dir);
    batle::RngStream rng(seed);
    const batle::HcmnistResult res = batle::generate_hcmnist(images, cfg, rng);
    batle::write_domain_csv((fs::path(out_dir) / "target.csv").string(), res.target);
    batle::write_domain_csv((fs::path(out_dir) / "source.csv").string(), res.source);
    nlohmann::json echo = batle::hcmnist_config_json(res.resolved);
    echo["seed"] = seed;
    batle::write_ground_truth_json((fs::path(out_dir) / "ground_truth.json").string(),
                                   *res.target.ground_truth, echo);
    std::cout << "hcmnist: " << res.target.n() << " target rows, " << res.source.n()
              << " source rows, true ate="
              << batle::format_double(res.target.ground_truth->true_ate) << "\n";
    std::cout << "written to " << out_dir << "\n";
    return 0;
}

int cmd_aipw(const std::string& data_path, std::size_t folds, std::uint64_t seed) {
    const batle::DomainDataset ds = batle::load_domain_csv(data_path);
    if (!ds.labeled()) throw batle::ConfigError("aipw: " + data_path + " holds no labeled rows");
    batle::AipwOptions opt;
    if (folds > 0) opt.folds = folds;
    batle::RngStream rng(seed);
    const batle::AteEstimate est =
        batle::aipw_estimate(ds.covariates, ds.treatments, ds.outcomes, opt, rng);
    std::cout << "n=" << ds.n() << " folds=" << opt.folds
              << " tau_hat=" << batle::format_double(est.tau_hat) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal-Batle estimator and benchmark harness"};
    app.require_subcommand(1);

    std::string config_path, out_dir, mnist_dir, data_path;
    std::size_t jobs = 0, folds = 0;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "run an experiment sweep from a JSON config");
    run->add_option("--config", config_path, "sweep config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--jobs", jobs, "worker threads (default: config value or 1)");

    auto* gg = app.add_subcommand("gen-gwas", "generate a GWAS benchmark dataset");
    gg->add_option("--config", config_path, "generator config (JSON)");
    gg->add_option("--out", out_dir, "output directory")->required();
    gg->add_option("--seed", seed, "generator seed (default 0)");

    auto* gh = app.add_subcommand("gen-hcmnist", "generate an HCMNIST benchmark dataset");
    gh->add_option("--mnist", mnist_dir, "directory with MNIST IDX files")->required();
    gh->add_option("--config", config_path, "generator config (JSON)");
    gh->add_option("--out", out_dir, "output directory")->required();
    gh->add_option("--seed", seed, "generator seed (default 0)");

    auto* ai = app.add_subcommand("aipw", "AIPW estimate on an exported labeled CSV");
    ai->add_option("--data", data_path, "labeled dataset CSV")->required();
    ai->add_option("--folds", folds, "cross-fitting folds (default 2)");
    ai->add_option("--seed", seed, "fold-assignment seed (default 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, jobs);
        if (gg->parsed()) return cmd_gen_gwas(config_path, out_dir, seed);
        if (gh->parsed()) return cmd_gen_hcmnist(mnist_dir, config_path, out_dir, seed);
        if (ai->parsed()) return cmd_aipw(data_path, folds, seed);
    } catch (const batle::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
