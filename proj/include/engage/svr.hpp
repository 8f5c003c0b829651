#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace engage {

// Per-feature standardization fitted on exactly the data the model trains
// on. Zero-variance features transform to 0 and are recorded.
struct Standardizer {
    Eigen::VectorXd means;
    Eigen::VectorXd stds; // population
    std::string fitted_on;
    std::vector<int> zero_std_columns;

    static Standardizer fit(const Eigen::MatrixXd& X, std::string partition = {});
    Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const;
};

struct LinearModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
    double C = 1.0;
    double epsilon = 0.1;
    int iterations_used = 0;
    bool converged = false;
    std::vector<std::string> feature_names;
    // Dual coefficients of the training points; kept for KKT diagnostics.
    Eigen::VectorXd dual_coefs;

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

struct FitOptions {
    double tol = 1e-4;       // KKT (b-interval) tolerance
    int max_iter = 10000;    // permutation sweeps
    std::uint64_t seed = 1;  // sweep-order seed
};

// Linear epsilon-insensitive SVR:
//   minimize 0.5*||w||^2 + C * sum_i max(0, |w.x_i + b - y_i| - epsilon)
// with an unpenalized intercept. Solved in the dual
//   min 0.5 b'Qb + eps*||b||_1 - y'b   s.t.  sum(b)=0, |b_i|<=C
// by exact two-variable updates over seeded random-permutation sweeps,
// pairing each visited index with the most violating partner.
LinearModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double C, double epsilon,
                const FitOptions& options = {});

double mae(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth);

struct GridSearchResult {
    double best_C = 0.0;
    double best_dev_mae = 0.0;
    std::vector<std::pair<double, double>> dev_curve; // (C, dev MAE), ascending C
    LinearModel best_model;
    Standardizer scaler; // fitted on train
};

// One model per C fitted on train (standardizer fitted on train only),
// scored by dev MAE in raw target units; ties resolve to the smaller C.
GridSearchResult grid_search(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                             const Eigen::MatrixXd& X_dev, const Eigen::VectorXd& y_dev,
                             std::vector<double> C_grid, double epsilon,
                             const FitOptions& options = {});

struct FinalizeResult {
    LinearModel model;
    Standardizer scaler; // refitted on train+dev
    double test_mae = 0.0;
};

// Refits standardizer and model on train+dev at best_C, then evaluates MAE
// on the held-out test set (targets stay in raw units).
FinalizeResult finalize_and_test(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                                 const Eigen::MatrixXd& X_dev, const Eigen::VectorXd& y_dev,
                                 const Eigen::MatrixXd& X_test, const Eigen::VectorXd& y_test,
                                 double best_C, double epsilon, const FitOptions& options = {});

struct WeightReportRow {
    std::string feature;
    double weight = 0.0;
    double scaled_p = 0.0; // -log10(p)/10, p floored at 1e-300
    bool excluded = false; // feature absent from the model
};

std::vector<WeightReportRow> weight_report(const LinearModel& model,
                                           const std::map<std::string, double>& univariate_p,
                                           const std::vector<std::string>& all_features);

struct KktReport {
    double max_violation = 0.0;      // largest KKT inconsistency in target units
    double max_inside_tube_dual = 0.0; // largest |dual| among strict tube interiors
    bool ok(double tol) const;
};

// Verifies the optimality conditions of a fitted model against its training
// data (X already standardized, as passed to fit).
KktReport kkt_check(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LinearModel& model,
                    double tol);

// Relative change of a variant MAE against the all-features MAE, in percent;
// positive means the variant improved (decreased) the MAE.
double rel_change_pct(double all_mae, double variant_mae);

// Inverse of rel_change_pct: recovers the variant MAE.
double apply_rel_change(double all_mae, double rel_pct);

} // namespace engage
