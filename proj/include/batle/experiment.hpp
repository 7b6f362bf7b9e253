#pragma once
// Experiment orchestration: parse a JSON sweep config, run the
// (ratio x dataset replication x method x model repetition) grid, and emit
// results.csv / aggregates.csv plus JSON sidecars into the output directory.
//
// Seed discipline: data for cell (d, ratio index ri) comes from the stream
// (master, "data", d, ri); training run (d, m, method) from the stream
// (master, "train", d, m, hash(method)). Run records land in grid order, so
// the results CSV is identical for any worker count (wall-time column aside,
// which is recorded only when record_wall_time is on).

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "batle/baselines.hpp"
#include "batle/dataset.hpp"
#include "batle/estimation.hpp"
#include "batle/gwas.hpp"
#include "batle/hcmnist.hpp"
#include "batle/ihdp.hpp"
#include "batle/io_util.hpp"
#include "batle/mnist_idx.hpp"
#include "batle/training.hpp"

#include <json.hpp>

namespace batle {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ExperimentConfig {
    std::string dataset;          // gwas | ihdp | hcmnist | custom-csv
    int setting = 0;              // 1 or 2; defaulted per dataset
    std::vector<double> ratios;   // r = n_t / n_s
    std::size_t b_d = 1;
    std::size_t b_m = 1;
    std::vector<std::string> methods{"causal_batle"};
    std::uint64_t master_seed = 0;
    TrainConfig train;
    NetworkConfig network;        // input_dim filled from data at run time
    GwasConfig gwas;
    HcmnistConfig hcmnist;
    AipwOptions aipw;
    std::string mnist_dir;        // hcmnist: directory with IDX files
    std::string ihdp_dir;         // ihdp: replication directory
    std::string data_dir;         // custom-csv: exported dataset directory
    std::size_t target_max = 0;   // optional subsample caps (0 = use all)
    std::size_t source_max = 0;
    bool record_wall_time = true;
    bool save_history = false;
    std::string out_dir;
    std::size_t jobs = 1;

    void validate() const {
        if (dataset != "gwas" && dataset != "ihdp" && dataset != "hcmnist" && dataset != "custom-csv")
            throw ConfigError("config: unknown dataset '" + dataset + "'");
        if (setting != 1 && setting != 2) throw ConfigError("config: setting must be 1 or 2");
        if ((dataset == "gwas" || dataset == "ihdp") && setting != 1)
            throw ConfigError("config: " + dataset + " is a labeled single-domain dataset and requires setting 1");
        if (dataset == "hcmnist" && setting != 2)
            throw ConfigError("config: hcmnist provides paired target/source data and requires setting 2");
        if (ratios.empty()) throw ConfigError("config: ratios must be nonempty");
        for (double r : ratios)
            if (!(r > 0.0)) throw ConfigError("config: every ratio r must be positive");
        if (b_d < 1 || b_m < 1) throw ConfigError("config: b_d and b_m must be >= 1");
        if (dataset == "ihdp" && b_d > kIhdpReplications)
            throw ConfigError("config: ihdp has only " + std::to_string(kIhdpReplications) +
                              " replications");
        if (methods.empty()) throw ConfigError("config: methods must be nonempty");
        for (const auto& m : methods) {
            if (m != "causal_batle" && m != "bayesian_dragonnet" && m != "dragonnet" && m != "aipw")
                throw ConfigError("config: unknown method '" + m + "'");
        }
        if (dataset == "hcmnist" && mnist_dir.empty())
            throw ConfigError("config: hcmnist requires mnist_dir");
        if (dataset == "ihdp" && ihdp_dir.empty()) throw ConfigError("config: ihdp requires ihdp_dir");
        if (dataset == "custom-csv" && data_dir.empty())
            throw ConfigError("config: custom-csv requires data_dir");
        train.validate();
        gwas.validate();
        hcmnist.validate();
        aipw.validate();
        if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                                const std::string& context) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("config: unknown key '" + it.key() + "' in " + context);
    }
}

inline void parse_train(const nlohmann::json& j, TrainConfig& tc) {
    reject_unknown_keys(j, {"weights", "learning_rate", "beta1", "beta2", "adam_epsilon", "epochs",
                            "batch_size", "disc_steps_per_batch", "patience",
                            "validation_fraction", "routing"},
                        "train");
    if (j.contains("weights")) {
        const auto w = j["weights"].get<std::vector<double>>();
        if (w.size() != 5) throw ConfigError("config: train.weights must have 5 entries");
        tc.weights = LossWeights{w[0], w[1], w[2], w[3], w[4]};
    }
    if (j.contains("learning_rate")) tc.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("beta1")) tc.beta1 = j["beta1"].get<double>();
    if (j.contains("beta2")) tc.beta2 = j["beta2"].get<double>();
    if (j.contains("adam_epsilon")) tc.adam_epsilon = j["adam_epsilon"].get<double>();
    if (j.contains("epochs")) tc.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size")) tc.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("disc_steps_per_batch"))
        tc.disc_steps_per_batch = j["disc_steps_per_batch"].get<std::size_t>();
    if (j.contains("patience")) tc.patience = j["patience"].get<std::size_t>();
    if (j.contains("validation_fraction"))
        tc.validation_fraction = j["validation_fraction"].get<double>();
    if (j.contains("routing")) {
        const std::string r = j["routing"].get<std::string>();
        if (r == "alternating")
            tc.routing = GradientRouting::alternating;
        else if (r == "joint")
            tc.routing = GradientRouting::joint;
        else
            throw ConfigError("config: train.routing must be 'alternating' or 'joint'");
    }
}

inline void parse_network(const nlohmann::json& j, NetworkConfig& nc) {
    reject_unknown_keys(j, {"shared_widths", "head_widths", "dropout_rate", "sigma_floor",
                            "activation", "discriminator_enabled", "reconstruction_enabled"},
                        "network");
    if (j.contains("shared_widths"))
        nc.shared_widths = j["shared_widths"].get<std::vector<std::size_t>>();
    if (j.contains("head_widths")) nc.head_widths = j["head_widths"].get<std::vector<std::size_t>>();
    if (j.contains("dropout_rate")) nc.dropout_rate = j["dropout_rate"].get<double>();
    if (j.contains("sigma_floor")) nc.sigma_floor = j["sigma_floor"].get<double>();
    if (j.contains("activation")) {
        const std::string a = j["activation"].get<std::string>();
        if (a == "silu")
            nc.activation = Activation::silu;
        else if (a == "tanh")
            nc.activation = Activation::tanh;
        else
            throw ConfigError("config: network.activation must be 'silu' or 'tanh'");
    }
    if (j.contains("discriminator_enabled"))
        nc.discriminator_enabled = j["discriminator_enabled"].get<bool>();
    if (j.contains("reconstruction_enabled"))
        nc.reconstruction_enabled = j["reconstruction_enabled"].get<bool>();
}

inline void parse_gwas(const nlohmann::json& j, GwasConfig& g) {
    reject_unknown_keys(j, {"n_samples", "n_snps", "n_components", "gamma_intercept", "tau_sd",
                            "n_clusters", "inv_gamma_shape", "inv_gamma_scale", "v_gene", "v_group",
                            "v_noise", "panel_rows", "freq_clip", "ld_threshold",
                            "reference_panel_path"},
                        "gwas");
    if (j.contains("n_samples")) g.n_samples = j["n_samples"].get<std::size_t>();
    if (j.contains("n_snps")) g.n_snps = j["n_snps"].get<std::size_t>();
    if (j.contains("n_components")) g.n_components = j["n_components"].get<std::size_t>();
    if (j.contains("gamma_intercept")) g.gamma_intercept = j["gamma_intercept"].get<double>();
    if (j.contains("tau_sd")) g.tau_sd = j["tau_sd"].get<double>();
    if (j.contains("n_clusters")) g.n_clusters = j["n_clusters"].get<std::size_t>();
    if (j.contains("inv_gamma_shape")) g.inv_gamma_shape = j["inv_gamma_shape"].get<double>();
    if (j.contains("inv_gamma_scale")) g.inv_gamma_scale = j["inv_gamma_scale"].get<double>();
    if (j.contains("v_gene")) g.v_gene = j["v_gene"].get<double>();
    if (j.contains("v_group")) g.v_group = j["v_group"].get<double>();
    if (j.contains("v_noise")) g.v_noise = j["v_noise"].get<double>();
    if (j.contains("panel_rows")) g.panel_rows = j["panel_rows"].get<std::size_t>();
    if (j.contains("freq_clip")) g.freq_clip = j["freq_clip"].get<double>();
    if (j.contains("ld_threshold")) g.ld_threshold = j["ld_threshold"].get<double>();
    if (j.contains("reference_panel_path"))
        g.reference_panel_path = j["reference_panel_path"].get<std::string>();
}

inline void parse_hcmnist(const nlohmann::json& j, HcmnistConfig& h) {
    reject_unknown_keys(j, {"digit_low", "digit_high", "clip_bound", "literal_phi_map",
                            "range_low", "range_high"},
                        "hcmnist");
    if (j.contains("digit_low")) h.digit_low = j["digit_low"].get<int>();
    if (j.contains("digit_high")) h.digit_high = j["digit_high"].get<int>();
    if (j.contains("clip_bound")) h.clip_bound = j["clip_bound"].get<double>();
    if (j.contains("literal_phi_map")) h.literal_phi_map = j["literal_phi_map"].get<bool>();
    if (j.contains("range_low")) {
        const auto r = j["range_low"].get<std::vector<double>>();
        if (r.size() != 2) throw ConfigError("config: hcmnist.range_low must be [min, max]");
        h.range_low_min = r[0];
        h.range_low_max = r[1];
    }
    if (j.contains("range_high")) {
        const auto r = j["range_high"].get<std::vector<double>>();
        if (r.size() != 2) throw ConfigError("config: hcmnist.range_high must be [min, max]");
        h.range_high_min = r[0];
        h.range_high_max = r[1];
    }
}

inline void parse_aipw(const nlohmann::json& j, AipwOptions& a) {
    reject_unknown_keys(j, {"folds", "ridge_lambda", "logistic_l2", "propensity_clip"}, "aipw");
    if (j.contains("folds")) a.folds = j["folds"].get<std::size_t>();
    if (j.contains("ridge_lambda")) a.ridge_lambda = j["ridge_lambda"].get<double>();
    if (j.contains("logistic_l2")) a.logistic_l2 = j["logistic_l2"].get<double>();
    if (j.contains("propensity_clip")) a.propensity_clip = j["propensity_clip"].get<double>();
}

}  // namespace detail

inline ExperimentConfig parse_config_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, {"dataset", "setting", "ratios", "p_t", "b_d", "b_m", "methods", "master_seed", "train",
            "network", "gwas", "hcmnist", "aipw", "mnist_dir", "ihdp_dir", "data_dir", "target_max",
            "source_max", "record_wall_time", "save_history", "out", "jobs"},
        "top level");
    ExperimentConfig c;
    try {
        if (!j.contains("dataset")) throw ConfigError("config: 'dataset' is required");
        c.dataset = j["dataset"].get<std::string>();
        if (j.contains("ratios") && j.contains("p_t"))
            throw ConfigError("config: give either 'ratios' or 'p_t', not both");
        if (j.contains("ratios")) c.ratios = j["ratios"].get<std::vector<double>>();
        if (j.contains("p_t")) {
            for (double p : j["p_t"].get<std::vector<double>>()) {
                if (!(p > 0.0 && p < 1.0)) throw ConfigError("config: p_t values must lie in (0,1)");
                c.ratios.push_back(p / (1.0 - p));
            }
        }
        if (j.contains("setting"))
            c.setting = j["setting"].get<int>();
        else
            c.setting = (c.dataset == "hcmnist" || c.dataset == "custom-csv") ? 2 : 1;
        if (j.contains("b_d")) c.b_d = j["b_d"].get<std::size_t>();
        if (j.contains("b_m")) c.b_m = j["b_m"].get<std::size_t>();
        if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
        if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
        if (j.contains("train")) detail::parse_train(j["train"], c.train);
        if (j.contains("network")) detail::parse_network(j["network"], c.network);
        if (j.contains("gwas")) detail::parse_gwas(j["gwas"], c.gwas);
        if (j.contains("hcmnist")) detail::parse_hcmnist(j["hcmnist"], c.hcmnist);
        if (j.contains("aipw")) detail::parse_aipw(j["aipw"], c.aipw);
        if (j.contains("mnist_dir")) c.mnist_dir = j["mnist_dir"].get<std::string>();
        if (j.contains("ihdp_dir")) c.ihdp_dir = j["ihdp_dir"].get<std::string>();
        if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
        if (j.contains("target_max")) c.target_max = j["target_max"].get<std::size_t>();
        if (j.contains("source_max")) c.source_max = j["source_max"].get<std::size_t>();
        if (j.contains("record_wall_time")) c.record_wall_time = j["record_wall_time"].get<bool>();
        if (j.contains("save_history")) c.save_history = j["save_history"].get<bool>();
        if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
        if (j.contains("jobs")) c.jobs = j["jobs"].get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }
    return parse_config_json(j);
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["dataset"] = c.dataset;
    j["setting"] = c.setting;
    j["ratios"] = c.ratios;
    j["b_d"] = c.b_d;
    j["b_m"] = c.b_m;
    j["methods"] = c.methods;
    j["master_seed"] = c.master_seed;
    j["train"] = {{"weights",
                   {c.train.weights.outcome, c.train.weights.propensity,
                    c.train.weights.discriminator, c.train.weights.adversarial,
                    c.train.weights.reconstruction}},
                  {"learning_rate", c.train.learning_rate},
                  {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},
                  {"adam_epsilon", c.train.adam_epsilon},
                  {"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"disc_steps_per_batch", c.train.disc_steps_per_batch},
                  {"validation_fraction", c.train.validation_fraction},
                  {"routing", c.train.routing == GradientRouting::joint ? "joint" : "alternating"}};
    if (c.train.patience) j["train"]["patience"] = *c.train.patience;
    j["network"] = network_config_json(c.network);
    j["gwas"] = gwas_config_json(c.gwas);
    j["hcmnist"] = hcmnist_config_json(c.hcmnist);
    j["aipw"] = {{"folds", c.aipw.folds},
                 {"ridge_lambda", c.aipw.ridge_lambda},
                 {"logistic_l2", c.aipw.logistic_l2},
                 {"propensity_clip", c.aipw.propensity_clip}};
    j["mnist_dir"] = c.mnist_dir;
    j["ihdp_dir"] = c.ihdp_dir;
    j["data_dir"] = c.data_dir;
    j["target_max"] = c.target_max;
    j["source_max"] = c.source_max;
    j["record_wall_time"] = c.record_wall_time;
    j["save_history"] = c.save_history;
    j["out"] = c.out_dir;
    j["jobs"] = c.jobs;
    return j;
}

struct RunRecord {
    std::size_t dataset_rep = 0;
    std::size_t model_rep = 0;
    std::string method;
    double ratio = 0.0;
    double tau_true = 0.0;
    double tau_hat = 0.0;
    double mae_value = 0.0;
    double wall_time_s = 0.0;
    std::uint64_t seed = 0;
    std::string status = "ok";  // ok | data_failed | train_failed | estimate_failed
    std::string message;        // diagnostic, not part of the CSV
};

struct AggregateRow {
    std::string method;
    double ratio = 0.0;
    AggregateResult stats;
};

struct SweepResult {
    std::vector<RunRecord> runs;
    std::vector<AggregateRow> aggregates;
    bool any_failed = false;
};

inline constexpr const char* kResultsHeader =
    "dataset_rep,model_rep,method,r,tau_true,tau_hat,mae,wall_time_s,seed,status";
inline constexpr const char* kAggregatesHeader = "method,r,B,mean_mae,ci_low,ci_high";

inline std::string results_csv(const std::vector<RunRecord>& runs) {
    std::string out = std::string(kResultsHeader) + "\n";
    for (const RunRecord& r : runs) {
        out += std::to_string(r.dataset_rep) + "," + std::to_string(r.model_rep) + "," + r.method +
               "," + format_double(r.ratio) + ",";
        if (r.status == "ok") {
            out += format_double(r.tau_true) + "," + format_double(r.tau_hat) + "," +
                   format_double(r.mae_value);
        } else {
            out += format_double(r.tau_true) + ",,";
        }
        out += "," + format_double(r.wall_time_s) + "," + std::to_string(r.seed) + "," + r.status +
               "\n";
    }
    return out;
}

inline std::string aggregates_csv(const std::vector<AggregateRow>& rows) {
    std::string out = std::string(kAggregatesHeader) + "\n";
    for (const AggregateRow& a : rows) {
        out += a.method + "," + format_double(a.ratio) + "," + std::to_string(a.stats.count) + "," +
               format_double(a.stats.mean_mae) + "," + format_double(a.stats.ci_low) + "," +
               format_double(a.stats.ci_high) + "\n";
    }
    return out;
}

namespace detail {

struct DataCell {
    DomainDataset target;  // labeled
    DomainDataset source;  // unlabeled (may be empty)
    double tau_true = 0.0;
    bool ok = false;
    std::string error;
};

inline DomainDataset empty_source(std::size_t dim) {
    DomainDataset s;
    s.is_target = false;
    s.covariates = Matrix(0, dim);
    return s;
}

inline DomainDataset subsample(const DomainDataset& ds, std::size_t n_keep, RngStream& rng) {
    if (n_keep >= ds.n()) return ds;
    std::vector<std::size_t> idx(ds.n());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    idx.resize(n_keep);
    DomainDataset out;
    out.is_target = ds.is_target;
    out.covariates = Matrix(n_keep, ds.dim());
    if (ds.labeled()) {
        out.treatments.resize(n_keep);
        out.outcomes.resize(n_keep);
    }
    const bool pot = ds.ground_truth && !ds.ground_truth->mu0.empty();
    if (ds.ground_truth) {
        out.ground_truth = GroundTruth{ds.ground_truth->true_ate, {}, {}};
        if (pot) {
            out.ground_truth->mu0.resize(n_keep);
            out.ground_truth->mu1.resize(n_keep);
        }
    }
    for (std::size_t k = 0; k < n_keep; ++k) {
        const std::size_t i = idx[k];
        for (std::size_t j = 0; j < ds.dim(); ++j) out.covariates(k, j) = ds.covariates(i, j);
        if (ds.labeled()) {
            out.treatments[k] = ds.treatments[i];
            out.outcomes[k] = ds.outcomes[i];
        }
        if (pot) {
            out.ground_truth->mu0[k] = ds.ground_truth->mu0[i];
            out.ground_truth->mu1[k] = ds.ground_truth->mu1[i];
        }
    }
    return out;
}

// Shared image cache so the IDX files are parsed once per process.
inline const ImageSet& cached_mnist(const std::string& dir) {
    static std::map<std::string, ImageSet> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(dir);
    if (it != cache.end()) return it->second;
    namespace fs = std::filesystem;
    const std::string images = (fs::path(dir) / "train-images-idx3-ubyte").string();
    const std::string labels = (fs::path(dir) / "train-labels-idx1-ubyte").string();
    return cache.emplace(dir, load_idx(images, labels)).first->second;
}

inline DataCell build_cell(const ExperimentConfig& cfg, std::size_t d, std::size_t ri) {
    DataCell cell;
    const double r = cfg.ratios[ri];
    RngStream data_rng(derive_seed(cfg.master_seed, {stream_tag("data"), d, ri}));
    try {
        if (cfg.setting == 1) {
            DomainDataset full;
            if (cfg.dataset == "gwas") {
                RngStream gen = data_rng.substream(0);
                full = simulate_gwas(cfg.gwas, gen).dataset;
            } else if (cfg.dataset == "ihdp") {
                full = load_ihdp(cfg.ihdp_dir, d);
            } else {  // custom-csv, setting 1
                namespace fs = std::filesystem;
                full = load_domain_csv((fs::path(cfg.data_dir) / "target.csv").string());
                full.ground_truth =
                    load_ground_truth_json((fs::path(cfg.data_dir) / "ground_truth.json").string());
            }
            if (cfg.target_max > 0) {
                RngStream sub = data_rng.substream(2);
                full = subsample(full, cfg.target_max, sub);
            }
            const double p_t = r / (1.0 + r);
            RngStream split = data_rng.substream(1);
            auto [target, source] = split_setting1(full, p_t, split);
            cell.tau_true = full.ground_truth ? full.ground_truth->true_ate : 0.0;
            if (!full.ground_truth)
                throw std::runtime_error("dataset carries no ground-truth treatment effect");
            cell.target = std::move(target);
            cell.source = std::move(source);
        } else {
            DomainDataset target, source;
            if (cfg.dataset == "hcmnist") {
                RngStream gen = data_rng.substream(0);
                auto res = generate_hcmnist(cached_mnist(cfg.mnist_dir), cfg.hcmnist, gen);
                target = std::move(res.target);
                source = std::move(res.source);
            } else {  // custom-csv, setting 2
                namespace fs = std::filesystem;
                target = load_domain_csv((fs::path(cfg.data_dir) / "target.csv").string());
                source = load_domain_csv((fs::path(cfg.data_dir) / "source.csv").string());
                target.ground_truth =
                    load_ground_truth_json((fs::path(cfg.data_dir) / "ground_truth.json").string());
            }
            if (!target.ground_truth)
                throw std::runtime_error("dataset carries no ground-truth treatment effect");
            RngStream sub = data_rng.substream(1);
            if (cfg.target_max > 0 && target.n() > cfg.target_max)
                target = subsample(target, cfg.target_max, sub);
            if (cfg.source_max > 0 && source.n() > cfg.source_max)
                source = subsample(source, cfg.source_max, sub);
            // Setting 2 realizes the ratio by subsampling the source pool.
            const auto want = static_cast<std::size_t>(
                std::llround(static_cast<double>(target.n()) / r));
            if (want > source.n())
                throw std::runtime_error("ratio " + format_double(r) + " needs " +
                                         std::to_string(want) + " source rows, only " +
                                         std::to_string(source.n()) + " available");
            source = subsample(source, want, sub);
            cell.tau_true = target.ground_truth->true_ate;
            cell.target = std::move(target);
            cell.source = std::move(source);
        }
        cell.ok = true;
    } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
    }
    return cell;
}

}  // namespace detail

inline SweepResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.out_dir.empty()) throw ConfigError("config: output directory is required");
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    if (cfg.save_history) fs::create_directories(fs::path(cfg.out_dir) / "history");
    write_text_file((fs::path(cfg.out_dir) / "config.json").string(),
                    config_to_json(cfg).dump(2) + "\n");

    const auto sweep_start = std::chrono::steady_clock::now();

    // Data cells are built sequentially so the sweep is deterministic for any
    // worker count; runs then execute in parallel.
    std::vector<detail::DataCell> cells(cfg.ratios.size() * cfg.b_d);
    for (std::size_t ri = 0; ri < cfg.ratios.size(); ++ri)
        for (std::size_t d = 0; d < cfg.b_d; ++d)
            cells[ri * cfg.b_d + d] = detail::build_cell(cfg, d, ri);

    struct RunSpec {
        std::size_t ri, d, mi, m;
    };
    std::vector<RunSpec> specs;
    for (std::size_t ri = 0; ri < cfg.ratios.size(); ++ri)
        for (std::size_t d = 0; d < cfg.b_d; ++d)
            for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
                for (std::size_t m = 0; m < cfg.b_m; ++m) specs.push_back({ri, d, mi, m});

    SweepResult sweep;
    sweep.runs.resize(specs.size());

    auto execute = [&](std::size_t si) {
        const RunSpec& sp = specs[si];
        const detail::DataCell& cell = cells[sp.ri * cfg.b_d + sp.d];
        const std::string& method = cfg.methods[sp.mi];
        RunRecord rec;
        rec.dataset_rep = sp.d;
        rec.model_rep = sp.m;
        rec.method = method;
        rec.ratio = cfg.ratios[sp.ri];
        rec.seed = derive_seed(cfg.master_seed,
                               {stream_tag("train"), sp.d, sp.m, stream_tag(method)});
        if (!cell.ok) {
            rec.status = "data_failed";
            rec.message = cell.error;
            sweep.runs[si] = std::move(rec);
            return;
        }
        rec.tau_true = cell.tau_true;
        RngStream run_rng(rec.seed);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            AteEstimate est;
            TrainHistory history;
            if (method == "aipw") {
                est = aipw_estimate(cell.target.covariates, cell.target.treatments,
                                    cell.target.outcomes, cfg.aipw, run_rng);
            } else {
                const ModelPreset preset = make_preset(method, cfg.network, cfg.train.weights);
                // Only causal_batle sees the source rows.
                const CombinedDataset combined =
                    method == "causal_batle"
                        ? combine_domains(cell.target, cell.source)
                        : combine_domains(cell.target, detail::empty_source(cell.target.dim()));
                TrainConfig tc = cfg.train;
                tc.weights = preset.weights;
                tc.seed = rec.seed;
                NetworkConfig nc = preset.network;
                nc.input_dim = combined.dim();
                TrainResult tr;
                try {
                    tr = train(tc, nc, combined, run_rng);
                } catch (const std::exception& e) {
                    rec.status = "train_failed";
                    rec.message = e.what();
                    throw;
                }
                history = std::move(tr.history);
                if (preset.mc_dropout) {
                    const McPrediction pred = predict_mc_dropout(nc, tr.params,
                                                                 cell.target.covariates,
                                                                 preset.mc_passes, run_rng);
                    est = estimate_ate(pred);
                } else {
                    const ForwardResult fwd =
                        forward(nc, tr.params, cell.target.covariates, DropoutMode::off);
                    est = estimate_ate(fwd.mu0, fwd.mu1);
                    est.mc_passes = 1;
                }
                if (cfg.save_history) {
                    const std::string name = method + "_r" + std::to_string(sp.ri) + "_d" +
                                             std::to_string(sp.d) + "_m" + std::to_string(sp.m) +
                                             ".csv";
                    write_history_csv((fs::path(cfg.out_dir) / "history" / name).string(), history);
                }
            }
            rec.tau_hat = est.tau_hat;
            rec.mae_value = mae(est.tau_hat, rec.tau_true);
            rec.status = "ok";
        } catch (const std::exception& e) {
            if (rec.status == "ok") {
                rec.status = "estimate_failed";
                rec.message = e.what();
            }
        }
        if (cfg.record_wall_time) {
            const auto t1 = std::chrono::steady_clock::now();
            rec.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
        }
        sweep.runs[si] = std::move(rec);
    };

    if (cfg.jobs <= 1) {
        for (std::size_t si = 0; si < specs.size(); ++si) execute(si);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const std::size_t workers = std::min(cfg.jobs, specs.size());
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t si = next.fetch_add(1);
                    if (si >= specs.size()) return;
                    execute(si);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    for (const RunRecord& r : sweep.runs)
        if (r.status != "ok") sweep.any_failed = true;

    // Aggregate per (method, ratio) over successful runs, in grid order.
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        for (std::size_t ri = 0; ri < cfg.ratios.size(); ++ri) {
            std::vector<double> maes;
            for (const RunRecord& r : sweep.runs)
                if (r.status == "ok" && r.method == cfg.methods[mi] && r.ratio == cfg.ratios[ri])
                    maes.push_back(r.mae_value);
            if (maes.empty()) continue;
            sweep.aggregates.push_back({cfg.methods[mi], cfg.ratios[ri], aggregate(maes)});
        }
    }

    write_text_file((fs::path(cfg.out_dir) / "results.csv").string(), results_csv(sweep.runs));
    write_text_file((fs::path(cfg.out_dir) / "aggregates.csv").string(),
                    aggregates_csv(sweep.aggregates));

    nlohmann::json meta;
    meta["tool"] = "batle";
    meta["format_version"] = 1;
    meta["n_runs"] = sweep.runs.size();
    std::size_t failed = 0;
    for (const RunRecord& r : sweep.runs)
        if (r.status != "ok") ++failed;
    meta["n_failed"] = failed;
    meta["jobs"] = cfg.jobs;
    meta["record_wall_time"] = cfg.record_wall_time;
    meta["ci_method"] = "normal approximation, mean +/- 1.96 sd/sqrt(B), 95%";
    meta["split_policy"] = "setting-1 split fixed per dataset replication, redrawn across d only";
    const auto sweep_end = std::chrono::steady_clock::now();
    meta["total_wall_s"] = std::chrono::duration<double>(sweep_end - sweep_start).count();
    nlohmann::json errors = nlohmann::json::array();
    for (std::size_t si = 0; si < sweep.runs.size(); ++si) {
        const RunRecord& r = sweep.runs[si];
        if (r.status != "ok")
            errors.push_back({{"run", si}, {"status", r.status}, {"message", r.message}});
    }
    meta["errors"] = std::move(errors);
    write_text_file((fs::path(cfg.out_dir) / "metadata.json").string(), meta.dump(2) + "\n");

    return sweep;
}

}  // namespace batle
