#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace engage {

// Pearson correlation of two equal-length series, clamped to [-1, 1].
// Throws std::invalid_argument for constant input ("undefined correlation").
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& z);

struct TTest {
    double t;
    double p; // two-tailed
};

// t = r * sqrt((n-2) / (1-r^2)); p = 2 * SF_t(|t|; n-2). |r| = 1 gives p = 0.
TTest p_value(double r, int n);

enum class SigLevel { none, p10, p05, p01 };

SigLevel significance(double p); // strict thresholds 0.1 / 0.05 / 0.01
const char* sig_marker(SigLevel s); // "", "^3", "^2", "^1"

struct CorrelationCell {
    double r = 0.0;
    double p = 1.0;
    int n = 0;
    SigLevel sig = SigLevel::none;
    bool missing = false;          // < 3 overlapping samples
    bool constant_input = false;   // correlation undefined, zero-filled
};

// Numeric table keyed by video id; NaN marks a missing value.
struct DataTable {
    std::vector<std::string> ids;
    std::vector<std::string> columns;
    Eigen::MatrixXd values; // ids x columns

    int column(const std::string& name) const; // -1 if absent
};

struct CorrelationMatrix {
    std::vector<std::string> row_labels; // engagement indicators
    std::vector<std::string> col_labels; // features
    std::vector<std::vector<CorrelationCell>> cells;
    std::vector<double> mean_row;              // per-feature mean r over prediction tasks
    std::vector<std::string> prediction_tasks; // rows feeding mean_row

    const CorrelationCell& at(const std::string& row, const std::string& col) const;
};

// One cell per (indicator, feature), using only videos where both values are
// present. Cells with fewer than 3 overlapping videos are flagged missing;
// constant columns yield flagged zero cells.
CorrelationMatrix build_matrix(const DataTable& features, const DataTable& indicators,
                               const std::vector<std::string>& prediction_tasks);

// Exports: r and p CSVs, appendix-style TSV with ^1/^2/^3 markers, JSON cells.
void write_matrix_csv(const CorrelationMatrix& m, const std::filesystem::path& r_path,
                      const std::filesystem::path& p_path);
void write_matrix_tsv(const CorrelationMatrix& m, const std::filesystem::path& path);
std::string matrix_to_json(const CorrelationMatrix& m);
CorrelationMatrix matrix_from_json(const std::string& json_text);

std::string format_appendix_cell(double r, SigLevel sig); // e.g. "0.440^1"

} // namespace engage
