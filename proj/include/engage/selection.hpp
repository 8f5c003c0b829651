#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

#include "engage/stats.hpp"
#include "engage/svr.hpp"

namespace engage {

enum class SelectionMethod { all, cross_task, automatic };

const char* to_string(SelectionMethod m); // "all" / "sel." / "auto."

struct FeatureScore {
    double score = 0.0;  // univariate correlation (Eq.-style scoring)
    double f_stat = 0.0; // score^2 * (n-2) / (1-score^2), df (1, n-2)
    double p = 1.0;
    bool constant = false;
};

struct SelectionResult {
    SelectionMethod method = SelectionMethod::all;
    std::string target;                     // indicator name; empty for cross-task
    std::vector<std::string> feature_names; // canonical column order
    int k = 0;
    std::map<std::string, FeatureScore> per_feature_scores; // automatic only
    double threshold = 0.0;                                 // cross-task only
    std::vector<std::pair<int, double>> dev_mae_curve;      // automatic only: (k, dev MAE)
    double best_C = 0.0;                                    // automatic only: winner's C
    bool empty_selection = false; // cross-task selected nothing; caller may fall back
};

// Features whose |mean r| over the prediction tasks reaches the threshold
// (boundary included). Target-independent: one set reused for every
// indicator.
SelectionResult cross_task_select(const CorrelationMatrix& matrix, double threshold = 0.2);

// Univariate linear-regression scores per feature column: correlation with
// the target, converted to an F statistic and p-value. Constant features
// score 0 with p = 1 and are flagged.
std::vector<FeatureScore> univariate_scores(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Brute-force prefix sweep: rank features by univariate p-value on the
// training partition, then for each k in [k_range.first, k_range.second]
// run the C grid search on the top-k prefix and keep the k with the lowest
// dev MAE (ties break toward smaller k).
SelectionResult auto_select(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                            const Eigen::MatrixXd& X_dev, const Eigen::VectorXd& y_dev,
                            const std::vector<std::string>& feature_names,
                            std::pair<int, int> k_range, const std::vector<double>& C_grid,
                            double epsilon, const FitOptions& options, std::string target);

} // namespace engage
