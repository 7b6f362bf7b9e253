#pragma once
// Target/source data model: a labeled target-domain table, an unlabeled
// source-domain table, and their concatenation with a domain flag D and a
// label-validity mask. Loss code must read labels only through the mask.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "batle/io_util.hpp"
#include "batle/matrix.hpp"
#include "batle/rng.hpp"

#include <json.hpp>

namespace batle {

struct GroundTruth {
    double true_ate = 0.0;
    std::vector<double> mu0;  // optional per-sample potentials; empty if unknown
    std::vector<double> mu1;
};

struct DomainDataset {
    Matrix covariates;                // n x V
    std::vector<double> treatments;   // n when labeled, empty otherwise (values 0/1)
    std::vector<double> outcomes;     // n when labeled, empty otherwise
    bool is_target = true;            // D: 1 target, 0 source
    std::optional<GroundTruth> ground_truth;

    std::size_t n() const { return covariates.rows; }
    std::size_t dim() const { return covariates.cols; }
    bool labeled() const { return !treatments.empty(); }

    void validate() const {
        if (treatments.empty() != outcomes.empty())
            throw std::invalid_argument("DomainDataset: treatments and outcomes must both be present or both absent");
        if (labeled() && (treatments.size() != n() || outcomes.size() != n()))
            throw std::invalid_argument("DomainDataset: label length mismatch");
        if (!is_target && labeled())
            throw std::invalid_argument("DomainDataset: source-domain rows must be unlabeled");
        if (is_target && !labeled())
            throw std::invalid_argument("DomainDataset: target-domain rows must carry treatment and outcome");
        if (ground_truth && !ground_truth->mu0.empty()) {
            if (ground_truth->mu0.size() != n() || ground_truth->mu1.size() != n())
                throw std::invalid_argument("DomainDataset: ground-truth potential length mismatch");
        }
    }
};

struct CombinedDataset {
    Matrix covariates;                 // n = n_t + n_s rows, target rows first
    std::vector<std::uint8_t> domain;  // D per row
    std::vector<double> treatments;    // full length; valid only where label_mask
    std::vector<double> outcomes;
    std::vector<std::uint8_t> label_mask;
    std::size_t n_target = 0;
    std::size_t n_source = 0;

    std::size_t n() const { return covariates.rows; }
    std::size_t dim() const { return covariates.cols; }

    double treatment_at(std::size_t i) const {
        if (!label_mask[i]) throw std::logic_error("CombinedDataset: treatment read on a masked source row");
        return treatments[i];
    }
    double outcome_at(std::size_t i) const {
        if (!label_mask[i]) throw std::logic_error("CombinedDataset: outcome read on a masked source row");
        return outcomes[i];
    }
};

// Concatenate target rows then source rows; labels of source rows stay masked.
inline CombinedDataset combine_domains(const DomainDataset& target, const DomainDataset& source) {
    target.validate();
    if (source.n() > 0) {
        source.validate();
        if (source.dim() != target.dim())
            throw std::invalid_argument(
                "combine_domains: covariate dimensions differ (" + std::to_string(target.dim()) +
                " vs " + std::to_string(source.dim()) +
                "); both domains must share one feature space (Assumption 1)");
    }
    CombinedDataset out;
    out.n_target = target.n();
    out.n_source = source.n();
    const std::size_t n = out.n_target + out.n_source;
    out.covariates = Matrix(n, target.dim());
    out.domain.assign(n, 0);
    out.treatments.assign(n, 0.0);
    out.outcomes.assign(n, 0.0);
    out.label_mask.assign(n, 0);
    for (std::size_t i = 0; i < out.n_target; ++i) {
        const double* r = target.covariates.row(i);
        double* o = out.covariates.row(i);
        for (std::size_t j = 0; j < target.dim(); ++j) o[j] = r[j];
        out.domain[i] = 1;
        out.treatments[i] = target.treatments[i];
        out.outcomes[i] = target.outcomes[i];
        out.label_mask[i] = 1;
    }
    for (std::size_t i = 0; i < out.n_source; ++i) {
        const double* r = source.covariates.row(i);
        double* o = out.covariates.row(out.n_target + i);
        for (std::size_t j = 0; j < source.dim(); ++j) o[j] = r[j];
    }
    return out;
}

// Setting 1: split one labeled dataset into a labeled target part and a
// label-stripped source part. round(n * p_t) rows keep their labels.
inline std::pair<DomainDataset, DomainDataset> split_setting1(const DomainDataset& dataset,
                                                              double p_t, RngStream& rng) {
    dataset.validate();
    if (!dataset.labeled()) throw std::invalid_argument("split_setting1: dataset must be labeled");
    if (!(p_t > 0.0 && p_t < 1.0)) throw std::invalid_argument("split_setting1: p_t must be in (0,1)");
    const std::size_t n = dataset.n();
    const std::size_t n_t =
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * p_t));
    if (n_t == 0 || n_t == n)
        throw std::invalid_argument("split_setting1: split leaves one side empty");

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);

    DomainDataset target, source;
    target.is_target = true;
    source.is_target = false;
    target.covariates = Matrix(n_t, dataset.dim());
    source.covariates = Matrix(n - n_t, dataset.dim());
    target.treatments.resize(n_t);
    target.outcomes.resize(n_t);

    const bool has_potentials = dataset.ground_truth && !dataset.ground_truth->mu0.empty();
    if (dataset.ground_truth) {
        target.ground_truth = GroundTruth{dataset.ground_truth->true_ate, {}, {}};
        if (has_potentials) {
            target.ground_truth->mu0.resize(n_t);
            target.ground_truth->mu1.resize(n_t);
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = idx[k];
        if (k < n_t) {
            double* o = target.covariates.row(k);
            const double* r = dataset.covariates.row(src);
            for (std::size_t j = 0; j < dataset.dim(); ++j) o[j] = r[j];
            target.treatments[k] = dataset.treatments[src];
            target.outcomes[k] = dataset.outcomes[src];
            if (has_potentials) {
                target.ground_truth->mu0[k] = dataset.ground_truth->mu0[src];
                target.ground_truth->mu1[k] = dataset.ground_truth->mu1[src];
            }
        } else {
            double* o = source.covariates.row(k - n_t);
            const double* r = dataset.covariates.row(src);
            for (std::size_t j = 0; j < dataset.dim(); ++j) o[j] = r[j];
        }
    }
    return {std::move(target), std::move(source)};
}

// ---------------------------------------------------------------------------
// Export format: one CSV per domain, header d,t,y,x_0..x_{V-1}; t and y are
// empty strings on source rows. A JSON sidecar carries the ground truth and
// the generating config.
// ---------------------------------------------------------------------------

inline void write_domain_csv(const std::string& path, const DomainDataset& ds) {
    ds.validate();
    std::string out;
    out += "d,t,y";
    for (std::size_t j = 0; j < ds.dim(); ++j) out += ",x_" + std::to_string(j);
    out += "\n";
    for (std::size_t i = 0; i < ds.n(); ++i) {
        out += ds.is_target ? "1," : "0,";
        if (ds.labeled()) {
            out += format_double(ds.treatments[i]);
            out += ",";
            out += format_double(ds.outcomes[i]);
        } else {
            out += ",";
        }
        const double* r = ds.covariates.row(i);
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            out += ",";
            out += format_double(r[j]);
        }
        out += "\n";
    }
    write_text_file(path, out);
}

inline DomainDataset load_domain_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw std::runtime_error("load_domain_csv: empty file " + path);
    const auto header = split_csv_line(lines[0]);
    if (header.size() < 4 || header[0] != "d" || header[1] != "t" || header[2] != "y")
        throw std::runtime_error("load_domain_csv: header must start with d,t,y,x_0");
    for (std::size_t j = 3; j < header.size(); ++j) {
        if (header[j] != "x_" + std::to_string(j - 3))
            throw std::runtime_error("load_domain_csv: unexpected column '" + header[j] + "'");
    }
    const std::size_t dim = header.size() - 3;
    const std::size_t n = lines.size() - 1;
    if (n == 0) throw std::runtime_error("load_domain_csv: no data rows in " + path);

    DomainDataset ds;
    ds.covariates = Matrix(n, dim);
    int domain_flag = -1;
    bool labeled = false;
    for (std::size_t i = 0; i < n; ++i) {
        const auto fields = split_csv_line(lines[i + 1]);
        if (fields.size() != header.size())
            throw std::runtime_error("load_domain_csv: row " + std::to_string(i + 1) +
                                     " has " + std::to_string(fields.size()) + " fields");
        const int d = fields[0] == "1" ? 1 : (fields[0] == "0" ? 0 : -1);
        if (d < 0) throw std::runtime_error("load_domain_csv: domain flag must be 0 or 1");
        if (domain_flag < 0) {
            domain_flag = d;
            labeled = !fields[1].empty();
            if (labeled) {
                ds.treatments.resize(n);
                ds.outcomes.resize(n);
            }
        } else if (d != domain_flag) {
            throw std::runtime_error("load_domain_csv: mixed domain flags in one file");
        }
        if (labeled != !fields[1].empty() || labeled != !fields[2].empty())
            throw std::runtime_error("load_domain_csv: inconsistent label presence at row " +
                                     std::to_string(i + 1));
        if (labeled) {
            ds.treatments[i] = parse_double(fields[1], "load_domain_csv t");
            ds.outcomes[i] = parse_double(fields[2], "load_domain_csv y");
        }
        for (std::size_t j = 0; j < dim; ++j)
            ds.covariates(i, j) = parse_double(fields[3 + j], "load_domain_csv x");
    }
    ds.is_target = domain_flag == 1;
    ds.validate();
    return ds;
}

inline void write_ground_truth_json(const std::string& path, const GroundTruth& gt,
                                    const nlohmann::json& config_echo) {
    nlohmann::json j;
    j["true_ate"] = gt.true_ate;
    if (!gt.mu0.empty()) {
        j["mu0"] = gt.mu0;
        j["mu1"] = gt.mu1;
    }
    j["config"] = config_echo;
    write_text_file(path, j.dump(2) + "\n");
}

inline GroundTruth load_ground_truth_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    nlohmann::json j;
    in >> j;
    GroundTruth gt;
    gt.true_ate = j.at("true_ate").get<double>();
    if (j.contains("mu0")) {
        gt.mu0 = j["mu0"].get<std::vector<double>>();
        gt.mu1 = j["mu1"].get<std::vector<double>>();
    }
    return gt;
}

}  // namespace batle
