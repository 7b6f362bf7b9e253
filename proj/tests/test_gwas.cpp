#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>

#include "batle/gwas.hpp"
#include "batle/rng.hpp"

using namespace batle;

namespace {

GwasConfig small_config() {
    GwasConfig cfg;
    cfg.n_samples = 120;
    cfg.n_snps = 60;
    cfg.panel_rows = 40;
    return cfg;
}

}  // namespace

TEST_CASE("shapes: covariates drop the treatment column") {
    GwasConfig cfg = small_config();
    RngStream rng(1);
    const GwasResult res = simulate_gwas(cfg, rng);
    REQUIRE(res.dataset.n() == 120);
    REQUIRE(res.dataset.dim() == 59);
    REQUIRE(res.dataset.labeled());
    REQUIRE(res.dataset.ground_truth.has_value());
}

TEST_CASE("exactly one nonzero effect, equal to the stored ground truth") {
    GwasConfig cfg = small_config();
    RngStream rng(2);
    const GwasResult res = simulate_gwas(cfg, rng);
    REQUIRE(res.tau != 0.0);
    REQUIRE(res.dataset.ground_truth->true_ate == res.tau);
    // Per-sample potentials differ by exactly tau everywhere.
    for (std::size_t i = 0; i < res.dataset.n(); ++i)
        REQUIRE(std::abs(res.dataset.ground_truth->mu1[i] - res.dataset.ground_truth->mu0[i] -
                         res.tau) < 1e-12);
}

TEST_CASE("outcome additivity: Y = gene + group + noise to 1e-12") {
    GwasConfig cfg = small_config();
    RngStream rng(3);
    const GwasResult res = simulate_gwas(cfg, rng);
    for (std::size_t i = 0; i < res.dataset.n(); ++i) {
        const double sum = res.gene_term[i] + res.group_term[i] + res.noise_term[i];
        REQUIRE(std::abs(res.dataset.outcomes[i] - sum) < 1e-12);
    }
}

TEST_CASE("covariates and treatment are binary") {
    GwasConfig cfg = small_config();
    RngStream rng(4);
    const GwasResult res = simulate_gwas(cfg, rng);
    for (double v : res.dataset.covariates.data) REQUIRE((v == 0.0 || v == 1.0));
    bool has0 = false, has1 = false;
    for (double t : res.dataset.treatments) {
        REQUIRE((t == 0.0 || t == 1.0));
        (t > 0.5 ? has1 : has0) = true;
    }
    REQUIRE(has0);
    REQUIRE(has1);
}

TEST_CASE("rescaling pins the variance ratios of the three terms") {
    GwasConfig cfg = small_config();
    RngStream rng(5);
    const GwasResult res = simulate_gwas(cfg, rng);
    const double vg = vec_variance(res.gene_term);
    const double vgr = vec_variance(res.group_term);
    const double vn = vec_variance(res.noise_term);
    // By construction sd(group) = sd(gene) sqrt(v_group/v_gene) on the sample.
    REQUIRE(std::abs(vgr / vg - cfg.v_group / cfg.v_gene) < 1e-9);
    REQUIRE(std::abs(vn / vg - cfg.v_noise / cfg.v_gene) < 1e-9);
}

TEST_CASE("deterministic per seed") {
    GwasConfig cfg = small_config();
    RngStream a(6), b(6);
    const GwasResult ra = simulate_gwas(cfg, a);
    const GwasResult rb = simulate_gwas(cfg, b);
    REQUIRE(ra.tau == rb.tau);
    REQUIRE(ra.treatment_snp == rb.treatment_snp);
    REQUIRE(ra.dataset.covariates.data == rb.dataset.covariates.data);
    REQUIRE(ra.dataset.outcomes == rb.dataset.outcomes);
}

TEST_CASE("config invariants") {
    GwasConfig cfg = small_config();
    cfg.v_gene = 0.5;  // fractions no longer sum to 1
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_config();
    cfg.n_samples = 5;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_config();
    cfg.n_components = 100;  // > n_snps
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("custom reference panel path is honored and prunes correlated SNPs") {
    // Build a panel whose third column duplicates the first: pruning should
    // drop it and the genotype matrix loses one SNP.
    const std::string path = "/tmp/batle_test_panel.csv";
    {
        RngStream rng(7);
        std::string csv;
        for (int i = 0; i < 30; ++i) {
            const double a = rng.uniform(0.1, 0.9);
            const double b = rng.uniform(0.1, 0.9);
            const double c = rng.uniform(0.1, 0.9);
            csv += format_double(a) + "," + format_double(b) + "," + format_double(a) + "," +
                   format_double(c) + "\n";
        }
        write_text_file(path, csv);
    }
    GwasConfig cfg;
    cfg.n_samples = 40;
    cfg.n_snps = 4;  // nominal; the panel file drives the actual width
    cfg.n_components = 2;
    cfg.reference_panel_path = path;
    RngStream rng(8);
    const GwasResult res = simulate_gwas(cfg, rng);
    REQUIRE(res.dataset.dim() == 2);  // 4 columns -> 3 after pruning -> minus treatment
    std::remove(path.c_str());
}
