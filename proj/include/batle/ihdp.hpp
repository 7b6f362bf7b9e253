#pragma once
// IHDP benchmark loader. One CSV per replication with header
//   treatment,y_factual,y_cfactual,mu0,mu1,x1,...,xK
// (the widely circulated files carry 25 x-columns; any K >= 1 is accepted).
// tools/fetch_ihdp.sh downloads the raw replication files and prepends this
// header. Ground truth is the per-sample (mu0, mu1) pair.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "batle/dataset.hpp"
#include "batle/io_util.hpp"

namespace batle {

inline constexpr std::size_t kIhdpReplications = 10;

inline DomainDataset load_ihdp_file(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.size() < 2) throw std::runtime_error("ihdp: no data rows in " + path);
    const auto header = split_csv_line(lines[0]);
    const std::vector<std::string> fixed{"treatment", "y_factual", "y_cfactual", "mu0", "mu1"};
    if (header.size() <= fixed.size())
        throw std::runtime_error("ihdp: header too short in " + path);
    for (std::size_t j = 0; j < fixed.size(); ++j) {
        if (header[j] != fixed[j])
            throw std::runtime_error("ihdp: expected column '" + fixed[j] + "' at position " +
                                     std::to_string(j) + ", found '" + header[j] + "'");
    }
    for (std::size_t j = fixed.size(); j < header.size(); ++j) {
        const std::string want = "x" + std::to_string(j - fixed.size() + 1);
        if (header[j] != want)
            throw std::runtime_error("ihdp: expected covariate column '" + want + "', found '" +
                                     header[j] + "'");
    }

    const std::size_t n = lines.size() - 1;
    const std::size_t dim = header.size() - fixed.size();
    DomainDataset ds;
    ds.is_target = true;
    ds.covariates = Matrix(n, dim);
    ds.treatments.resize(n);
    ds.outcomes.resize(n);
    GroundTruth gt;
    gt.mu0.resize(n);
    gt.mu1.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = split_csv_line(lines[i + 1]);
        if (f.size() != header.size())
            throw std::runtime_error("ihdp: row " + std::to_string(i + 1) + " has " +
                                     std::to_string(f.size()) + " fields, expected " +
                                     std::to_string(header.size()));
        ds.treatments[i] = parse_double(f[0], "ihdp treatment");
        if (ds.treatments[i] != 0.0 && ds.treatments[i] != 1.0)
            throw std::runtime_error("ihdp: treatment must be 0 or 1 at row " + std::to_string(i + 1));
        ds.outcomes[i] = parse_double(f[1], "ihdp y_factual");
        gt.mu0[i] = parse_double(f[3], "ihdp mu0");
        gt.mu1[i] = parse_double(f[4], "ihdp mu1");
        for (std::size_t j = 0; j < dim; ++j)
            ds.covariates(i, j) = parse_double(f[5 + j], "ihdp covariate");
    }
    double ate = 0.0;
    for (std::size_t i = 0; i < n; ++i) ate += gt.mu1[i] - gt.mu0[i];
    gt.true_ate = ate / static_cast<double>(n);
    ds.ground_truth = std::move(gt);
    ds.validate();
    return ds;
}

// `path` is either a replication directory holding ihdp_npci_<r+1>.csv files
// or a single CSV file (the replication index is still bounds-checked).
inline DomainDataset load_ihdp(const std::string& path, std::size_t replication) {
    if (replication >= kIhdpReplications)
        throw std::invalid_argument("load_ihdp: replication " + std::to_string(replication) +
                                    " out of range [0, " + std::to_string(kIhdpReplications) + ")");
    namespace fs = std::filesystem;
    if (fs::is_directory(path)) {
        const std::string file =
            (fs::path(path) / ("ihdp_npci_" + std::to_string(replication + 1) + ".csv")).string();
        return load_ihdp_file(file);
    }
    return load_ihdp_file(path);
}

}  // namespace batle
