#pragma once
// Semi-synthetic GWAS benchmark generator.
//
// Pipeline: reference allele-frequency panel (synthetic by default, or a CSV
// panel) -> LD pruning -> PCA basis S with an appended intercept row ->
// simulated loadings Gamma -> allele frequencies F = Gamma * S, clipped to a
// valid probability range -> binary genotypes X ~ Binomial(1, F) -> one SNP
// column becomes the binary treatment with effect tau ~ N(0, tau_sd) -> a
// k-means grouping of X supplies per-cluster intercepts and noise scales ->
// intercept and noise are rescaled so the gene, group, and noise terms hold
// fixed shares of the outcome variance -> Y = tau*X_v + gamma_c + eps.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "batle/dataset.hpp"
#include "batle/io_util.hpp"
#include "batle/kernels.hpp"
#include "batle/kmeans.hpp"
#include "batle/matrix.hpp"
#include "batle/pca.hpp"
#include "batle/rng.hpp"

namespace batle {

struct GwasConfig {
    std::size_t n_samples = 2000;   // J
    std::size_t n_snps = 10000;     // V
    std::size_t n_components = 3;   // L
    double gamma_intercept = 0.05;  // loading on the intercept row of S
    double tau_sd = 0.5;
    std::size_t n_clusters = 3;
    double inv_gamma_shape = 3.0;
    double inv_gamma_scale = 1.0;
    double v_gene = 0.4;
    double v_group = 0.4;
    double v_noise = 0.2;
    std::size_t panel_rows = 200;       // synthetic reference panel height
    double freq_clip = 0.01;            // F clipped to [freq_clip, 1-freq_clip]
    double ld_threshold = 0.95;         // prune panel columns with |corr| above this
    std::string reference_panel_path;   // optional CSV panel instead of synthetic

    void validate() const {
        if (n_samples < 10) throw std::invalid_argument("GwasConfig: n_samples must be >= 10");
        if (n_snps < 2) throw std::invalid_argument("GwasConfig: n_snps must be >= 2");
        if (n_components == 0 || n_components > n_snps)
            throw std::invalid_argument("GwasConfig: n_components out of range");
        if (n_clusters == 0) throw std::invalid_argument("GwasConfig: n_clusters must be >= 1");
        if (inv_gamma_shape <= 0.0 || inv_gamma_scale <= 0.0)
            throw std::invalid_argument("GwasConfig: inverse-gamma parameters must be positive");
        auto frac_ok = [](double v) { return v > 0.0 && v < 1.0; };
        if (!frac_ok(v_gene) || !frac_ok(v_group) || !frac_ok(v_noise))
            throw std::invalid_argument("GwasConfig: variance fractions must lie in (0,1)");
        if (std::abs(v_gene + v_group + v_noise - 1.0) > 1e-9)
            throw std::invalid_argument("GwasConfig: variance fractions must sum to 1");
        if (tau_sd <= 0.0) throw std::invalid_argument("GwasConfig: tau_sd must be positive");
        if (panel_rows < 2) throw std::invalid_argument("GwasConfig: panel_rows must be >= 2");
        if (!(freq_clip > 0.0 && freq_clip < 0.5))
            throw std::invalid_argument("GwasConfig: freq_clip must be in (0, 0.5)");
        if (!(ld_threshold > 0.0 && ld_threshold <= 1.0))
            throw std::invalid_argument("GwasConfig: ld_threshold must be in (0, 1]");
    }
};

struct GwasResult {
    DomainDataset dataset;               // labeled single-domain table (covariates exclude the treatment SNP)
    double tau = 0.0;                    // the one nonzero effect
    std::size_t treatment_snp = 0;       // column index in the post-pruning genotype matrix
    std::vector<double> gene_term;       // Y decomposition; Y = gene + group + noise
    std::vector<double> group_term;
    std::vector<double> noise_term;
    std::vector<std::size_t> clusters;   // k-means assignment per sample
};

namespace detail {

inline Matrix synthetic_panel(std::size_t rows, std::size_t cols, RngStream& rng) {
    Matrix panel(rows, cols);
    for (double& v : panel.data) v = rng.uniform(0.05, 0.95);
    return panel;
}

inline Matrix load_panel_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw std::runtime_error("reference panel: empty file " + path);
    const std::size_t cols = split_csv_line(lines[0]).size();
    Matrix panel(lines.size(), cols);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto fields = split_csv_line(lines[i]);
        if (fields.size() != cols)
            throw std::runtime_error("reference panel: ragged row " + std::to_string(i));
        for (std::size_t j = 0; j < cols; ++j)
            panel(i, j) = parse_double(fields[j], "reference panel");
    }
    return panel;
}

// Greedy LD pruning: keep a column unless its correlation with an already
// kept column exceeds the threshold. Returns kept column indices in order.
inline std::vector<std::size_t> ld_prune(const Matrix& panel, double threshold) {
    const std::size_t n = panel.rows;
    const std::size_t v = panel.cols;
    Matrix z(n, v);  // standardized columns; zero-variance columns are dropped
    std::vector<bool> usable(v, true);
    const auto mu = column_means(panel);
    std::vector<double> norm(v, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < v; ++j) {
            const double c = panel(i, j) - mu[j];
            z(i, j) = c;
            norm[j] += c * c;
        }
    for (std::size_t j = 0; j < v; ++j) {
        if (norm[j] <= 0.0) {
            usable[j] = false;
            continue;
        }
        const double inv = 1.0 / std::sqrt(norm[j]);
        for (std::size_t i = 0; i < n; ++i) z(i, j) *= inv;
    }

    std::vector<std::size_t> kept;
    kept.reserve(v);
    for (std::size_t j = 0; j < v; ++j) {
        if (!usable[j]) continue;
        bool ok = true;
        for (std::size_t kj : kept) {
            double corr = 0.0;
            for (std::size_t i = 0; i < n; ++i) corr += z(i, j) * z(i, kj);
            if (std::abs(corr) > threshold) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(j);
    }
    if (kept.size() < 2) throw std::runtime_error("ld_prune: fewer than 2 SNPs survive pruning");
    return kept;
}

}  // namespace detail

inline GwasResult simulate_gwas(const GwasConfig& config, RngStream& rng) {
    config.validate();
    const std::size_t j_samples = config.n_samples;

    // Reference panel and LD pruning.
    Matrix panel = config.reference_panel_path.empty()
                       ? detail::synthetic_panel(config.panel_rows, config.n_snps, rng)
                       : detail::load_panel_csv(config.reference_panel_path);
    if (panel.cols != config.n_snps && config.reference_panel_path.empty())
        throw std::logic_error("simulate_gwas: panel width mismatch");
    const auto kept = detail::ld_prune(panel, config.ld_threshold);
    Matrix pruned(panel.rows, kept.size());
    for (std::size_t i = 0; i < panel.rows; ++i)
        for (std::size_t j = 0; j < kept.size(); ++j) pruned(i, j) = panel(i, kept[j]);
    const std::size_t n_snps = pruned.cols;
    if (config.n_components > std::min(pruned.rows, n_snps))
        throw std::invalid_argument("simulate_gwas: n_components exceeds panel rank bound");

    // PCA basis with an appended intercept row: S is (L+1) x V.
    const PcaResult pca = pca_fit(pruned, config.n_components);
    const std::size_t l = config.n_components;
    Matrix s(l + 1, n_snps);
    for (std::size_t k = 0; k < l; ++k)
        for (std::size_t j = 0; j < n_snps; ++j) s(k, j) = pca.components(k, j);
    for (std::size_t j = 0; j < n_snps; ++j) s(l, j) = 1.0;

    // Simulated loadings: Gamma[j,d] ~ 0.9 * Uniform(0, 0.5), intercept column fixed.
    Matrix gamma_load(j_samples, l + 1);
    for (std::size_t i = 0; i < j_samples; ++i) {
        for (std::size_t d = 0; d < l; ++d) gamma_load(i, d) = 0.9 * rng.uniform(0.0, 0.5);
        gamma_load(i, l) = config.gamma_intercept;
    }

    // Allele frequencies and genotypes.
    Matrix freq = matmul(gamma_load, s);
    for (double& f : freq.data) f = clip(f, config.freq_clip, 1.0 - config.freq_clip);
    Matrix x(j_samples, n_snps);
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = rng.bernoulli(freq.data[i]) ? 1.0 : 0.0;

    // Treatment SNP: redraw until the column carries both genotype values, so
    // both treatment arms exist.
    std::size_t v_col = 0;
    bool found = false;
    for (int attempt = 0; attempt < 100 && !found; ++attempt) {
        v_col = static_cast<std::size_t>(rng.uniform_index(n_snps));
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < j_samples; ++i) (x(i, v_col) > 0.5 ? has1 : has0) = true;
        found = has0 && has1;
    }
    if (!found) throw std::runtime_error("simulate_gwas: no SNP column with both genotypes after 100 draws");
    const double tau = config.tau_sd * rng.normal();

    // Confounding: k-means grouping supplies intercepts and noise scales.
    const KmeansResult km = kmeans(x, config.n_clusters, rng);
    std::vector<double> sigma_c(config.n_clusters);
    for (double& sc : sigma_c) sc = rng.inv_gamma(config.inv_gamma_shape, config.inv_gamma_scale);

    std::vector<double> gene(j_samples), group_raw(j_samples), noise_raw(j_samples);
    for (std::size_t i = 0; i < j_samples; ++i) {
        gene[i] = tau * x(i, v_col);
        group_raw[i] = static_cast<double>(km.assignments[i]);  // cluster id as raw intercept
        noise_raw[i] = sigma_c[km.assignments[i]] * rng.normal();
    }

    // Rescale so gene:group:noise variance shares are v_gene:v_group:v_noise.
    const double sd_gene = vec_sd(gene);
    const double sd_group = vec_sd(group_raw);
    const double sd_noise = vec_sd(noise_raw);
    if (sd_gene <= 0.0) throw std::runtime_error("simulate_gwas: degenerate treatment column");
    if (sd_group <= 0.0) throw std::runtime_error("simulate_gwas: degenerate clustering (single occupied cluster)");
    if (sd_noise <= 0.0) throw std::runtime_error("simulate_gwas: degenerate noise");
    const double base = sd_gene / std::sqrt(config.v_gene);
    const double group_scale = base * std::sqrt(config.v_group) / sd_group;
    const double noise_scale = base * std::sqrt(config.v_noise) / sd_noise;

    GwasResult out;
    out.tau = tau;
    out.treatment_snp = v_col;
    out.clusters = km.assignments;
    out.gene_term = std::move(gene);
    out.group_term.resize(j_samples);
    out.noise_term.resize(j_samples);
    for (std::size_t i = 0; i < j_samples; ++i) {
        out.group_term[i] = group_raw[i] * group_scale;
        out.noise_term[i] = noise_raw[i] * noise_scale;
    }

    DomainDataset& ds = out.dataset;
    ds.is_target = true;
    ds.covariates = Matrix(j_samples, n_snps - 1);
    ds.treatments.resize(j_samples);
    ds.outcomes.resize(j_samples);
    GroundTruth gt;
    gt.true_ate = tau;
    gt.mu0.resize(j_samples);
    gt.mu1.resize(j_samples);
    for (std::size_t i = 0; i < j_samples; ++i) {
        double* o = ds.covariates.row(i);
        std::size_t oj = 0;
        const double* r = x.row(i);
        for (std::size_t j = 0; j < n_snps; ++j) {
            if (j == v_col) continue;
            o[oj++] = r[j];
        }
        ds.treatments[i] = x(i, v_col);
        ds.outcomes[i] = out.gene_term[i] + out.group_term[i] + out.noise_term[i];
        gt.mu0[i] = out.group_term[i];
        gt.mu1[i] = out.group_term[i] + tau;
    }
    ds.ground_truth = std::move(gt);
    ds.validate();
    return out;
}

inline nlohmann::json gwas_config_json(const GwasConfig& c) {
    return nlohmann::json{{"n_samples", c.n_samples},
                          {"n_snps", c.n_snps},
                          {"n_components", c.n_components},
                          {"gamma_intercept", c.gamma_intercept},
                          {"tau_sd", c.tau_sd},
                          {"n_clusters", c.n_clusters},
                          {"inv_gamma_shape", c.inv_gamma_shape},
                          {"inv_gamma_scale", c.inv_gamma_scale},
                          {"v_gene", c.v_gene},
                          {"v_group", c.v_group},
                          {"v_noise", c.v_noise},
                          {"panel_rows", c.panel_rows},
                          {"freq_clip", c.freq_clip},
                          {"ld_threshold", c.ld_threshold},
                          {"reference_panel_path", c.reference_panel_path}};
}

}  // namespace batle
