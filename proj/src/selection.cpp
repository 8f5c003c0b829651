#include "engage/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "engage/special.hpp"

namespace engage {

const char* to_string(SelectionMethod m) {
    switch (m) {
        case SelectionMethod::all: return "all";
        case SelectionMethod::cross_task: return "sel.";
        case SelectionMethod::automatic: return "auto.";
    }
    return "?";
}

SelectionResult cross_task_select(const CorrelationMatrix& matrix, double threshold) {
    if (matrix.mean_row.size() != matrix.col_labels.size())
        throw std::invalid_argument("cross_task_select: matrix has no mean row");

    SelectionResult result;
    result.method = SelectionMethod::cross_task;
    result.threshold = threshold;
    for (std::size_t j = 0; j < matrix.col_labels.size(); ++j)
        if (std::fabs(matrix.mean_row[j]) >= threshold)
            result.feature_names.push_back(matrix.col_labels[j]);
    result.k = static_cast<int>(result.feature_names.size());
    result.empty_selection = result.feature_names.empty();
    return result;
}

std::vector<FeatureScore> univariate_scores(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::Index n = X.rows();
    if (n < 3) throw std::invalid_argument("univariate_scores: need at least 3 samples");
    if (y.size() != n) throw std::invalid_argument("univariate_scores: X/y size mismatch");

    Eigen::VectorXd yc = y.array() - y.mean();
    const double sy = std::sqrt(yc.squaredNorm() / static_cast<double>(n));
    if (sy <= 0.0) throw std::invalid_argument("univariate_scores: constant target");

    std::vector<FeatureScore> scores(X.cols());
    const double df = static_cast<double>(n - 2);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        FeatureScore& fs = scores[j];
        Eigen::VectorXd xc = X.col(j).array() - X.col(j).mean();
        double sx = std::sqrt(xc.squaredNorm() / static_cast<double>(n));
        if (sx <= 0.0) {
            fs.constant = true;
            continue; // score 0, p 1
        }
        double r = std::clamp(xc.dot(yc) / (static_cast<double>(n) * sx * sy), -1.0, 1.0);
        fs.score = r;
        if (std::fabs(r) >= 1.0) {
            fs.f_stat = std::numeric_limits<double>::infinity();
            fs.p = 0.0;
        } else {
            fs.f_stat = r * r * df / (1.0 - r * r);
            fs.p = f_sf(fs.f_stat, 1.0, df);
        }
    }
    return scores;
}

SelectionResult auto_select(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                            const Eigen::MatrixXd& X_dev, const Eigen::VectorXd& y_dev,
                            const std::vector<std::string>& feature_names,
                            std::pair<int, int> k_range, const std::vector<double>& C_grid,
                            double epsilon, const FitOptions& options, std::string target) {
    const int n_features = static_cast<int>(X_train.cols());
    if (static_cast<int>(feature_names.size()) != n_features)
        throw std::invalid_argument("auto_select: name/column mismatch");
    if (k_range.first < 1 || k_range.second > n_features || k_range.first > k_range.second)
        throw std::invalid_argument("auto_select: k range out of bounds");

    SelectionResult result;
    result.method = SelectionMethod::automatic;
    result.target = std::move(target);

    auto scores = univariate_scores(X_train, y_train);
    for (int j = 0; j < n_features; ++j)
        result.per_feature_scores[feature_names[j]] = scores[j];

    // p-value ranking; ties break by canonical column order.
    std::vector<int> ranking(n_features);
    std::iota(ranking.begin(), ranking.end(), 0);
    std::stable_sort(ranking.begin(), ranking.end(),
                     [&scores](int a, int b) { return scores[a].p < scores[b].p; });

    double best_mae = std::numeric_limits<double>::infinity();
    int best_k = -1;
    double best_C = 0.0;
    for (int k = k_range.first; k <= k_range.second; ++k) {
        std::vector<int> cols(ranking.begin(), ranking.begin() + k);
        std::sort(cols.begin(), cols.end());
        Eigen::MatrixXd Xtr(X_train.rows(), k), Xdv(X_dev.rows(), k);
        for (int c = 0; c < k; ++c) {
            Xtr.col(c) = X_train.col(cols[c]);
            Xdv.col(c) = X_dev.col(cols[c]);
        }
        GridSearchResult gs = grid_search(Xtr, y_train, Xdv, y_dev, C_grid, epsilon, options);
        result.dev_mae_curve.emplace_back(k, gs.best_dev_mae);
        if (gs.best_dev_mae < best_mae) {
            best_mae = gs.best_dev_mae;
            best_k = k;
            best_C = gs.best_C;
        }
    }

    result.k = best_k;
    result.best_C = best_C;
    std::vector<int> winner(ranking.begin(), ranking.begin() + best_k);
    std::sort(winner.begin(), winner.end());
    for (int c : winner) result.feature_names.push_back(feature_names[c]);
    return result;
}

} // namespace engage
