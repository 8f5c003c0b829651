#include "engage/svr.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "engage/rng.hpp"

namespace engage {

Standardizer Standardizer::fit(const Eigen::MatrixXd& X, std::string partition) {
    if (X.rows() == 0) throw std::invalid_argument("Standardizer: empty matrix");
    Standardizer s;
    s.fitted_on = std::move(partition);
    s.means = X.colwise().mean();
    s.stds.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double var = (X.col(j).array() - s.means[j]).square().mean();
        s.stds[j] = std::sqrt(var);
        if (s.stds[j] <= 0.0) s.zero_std_columns.push_back(static_cast<int>(j));
    }
    return s;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& X) const {
    if (X.cols() != means.size()) throw std::invalid_argument("Standardizer: column mismatch");
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (stds[j] > 0.0)
            out.col(j) = (X.col(j).array() - means[j]) / stds[j];
        else
            out.col(j).setZero();
    }
    return out;
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& X) const {
    if (X.cols() != weights.size()) throw std::invalid_argument("predict: column mismatch");
    return (X * weights).array() + bias;
}

namespace {

constexpr Eigen::Index kGramCacheLimit = 1500; // cache Q=XX' up to this many samples

struct DualState {
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& y;
    double C;
    double eps;
    Eigen::MatrixXd Q; // empty when n > kGramCacheLimit
    Eigen::VectorXd beta;
    Eigen::VectorXd w;
    Eigen::VectorXd g; // g_i = w.x_i - y_i

    double lower(Eigen::Index i) const {
        if (beta[i] >= C) return -std::numeric_limits<double>::infinity();
        return beta[i] >= 0.0 ? -g[i] - eps : -g[i] + eps;
    }
    double upper(Eigen::Index i) const {
        if (beta[i] <= -C) return std::numeric_limits<double>::infinity();
        return beta[i] <= 0.0 ? -g[i] + eps : -g[i] - eps;
    }

    double qdot(Eigen::Index i, Eigen::Index j) const {
        if (Q.size() > 0) return Q(i, j);
        return X.row(i).dot(X.row(j));
    }

    double objective() const {
        return 0.5 * w.squaredNorm() + eps * beta.array().abs().sum() - y.dot(beta);
    }
};

// Exact minimizer of the two-variable subproblem: beta_i += delta,
// beta_j -= delta, keeping the equality constraint. The restriction is a
// convex piecewise quadratic; its minimum sits at a kink, a box edge, or a
// stationary point of one of the three sign regimes.
bool pair_update(DualState& s, Eigen::Index i, Eigen::Index j) {
    const double bi = s.beta[i], bj = s.beta[j];
    const double lo = std::max(-s.C - bi, bj - s.C);
    const double hi = std::min(s.C - bi, bj + s.C);
    if (!(lo < hi)) return false;

    const double a = s.qdot(i, i) + s.qdot(j, j) - 2.0 * s.qdot(i, j);
    const double d0 = s.g[i] - s.g[j];

    double candidates[7];
    int n_cand = 0;
    candidates[n_cand++] = lo;
    candidates[n_cand++] = hi;
    if (-bi > lo && -bi < hi) candidates[n_cand++] = -bi;
    if (bj > lo && bj < hi) candidates[n_cand++] = bj;
    if (a > 0.0) {
        for (double shift : {-2.0 * s.eps, 0.0, 2.0 * s.eps}) {
            double d = -(d0 + shift) / a;
            candidates[n_cand++] = std::clamp(d, lo, hi);
        }
    }

    auto delta_obj = [&](double d) {
        return 0.5 * a * d * d + d0 * d + s.eps * (std::fabs(bi + d) - std::fabs(bi)) +
               s.eps * (std::fabs(bj - d) - std::fabs(bj));
    };

    double best_d = 0.0, best_v = 0.0;
    for (int c = 0; c < n_cand; ++c) {
        double v = delta_obj(candidates[c]);
        if (v < best_v) {
            best_v = v;
            best_d = candidates[c];
        }
    }
    if (!(best_v < 0.0)) return false;

    const double snap = 1e-12 * s.C;
    double bi_new = std::clamp(bi + best_d, -s.C, s.C);
    if (std::fabs(bi_new) <= snap) bi_new = 0.0;
    double bj_new = std::clamp(bj - (bi_new - bi), -s.C, s.C);
    if (std::fabs(bj_new) <= snap) bj_new = 0.0;

    const double di = bi_new - bi;
    const double dj = bj_new - bj;
    s.beta[i] = bi_new;
    s.beta[j] = bj_new;
    s.w += di * s.X.row(i).transpose() + dj * s.X.row(j).transpose();
    if (s.Q.size() > 0)
        s.g += di * s.Q.col(i) + dj * s.Q.col(j);
    else
        s.g += di * (s.X * s.X.row(i).transpose()) + dj * (s.X * s.X.row(j).transpose());
    return true;
}

} // namespace

LinearModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double C, double epsilon,
                const FitOptions& options) {
    const Eigen::Index n = X.rows();
    if (n < 2) throw std::invalid_argument("fit: need at least 2 samples");
    if (X.rows() != y.size()) throw std::invalid_argument("fit: X/y size mismatch");
    if (!(C > 0.0)) throw std::invalid_argument("fit: C must be > 0");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("fit: epsilon must be >= 0");
    if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("fit: non-finite input");

    DualState s{X, y, C, epsilon, {}, Eigen::VectorXd::Zero(n),
                Eigen::VectorXd::Zero(X.cols()), -y};
    if (n <= kGramCacheLimit) s.Q = X * X.transpose();

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng = Rng(options.seed).split(0x5f72, static_cast<std::uint64_t>(n));

    auto scan_bounds = [&](Eigen::Index* arg_lo, Eigen::Index* arg_up) {
        double best_lo = -std::numeric_limits<double>::infinity();
        double best_up = std::numeric_limits<double>::infinity();
        *arg_lo = *arg_up = -1;
        for (Eigen::Index k = 0; k < n; ++k) {
            double lb = s.lower(k);
            double ub = s.upper(k);
            if (lb > best_lo) {
                best_lo = lb;
                *arg_lo = k;
            }
            if (ub < best_up) {
                best_up = ub;
                *arg_up = k;
            }
        }
        return std::make_pair(best_lo, best_up);
    };

    LinearModel model;
    model.C = C;
    model.epsilon = epsilon;
    int sweeps = 0;
    bool converged = false;
    double prev_objective = s.objective();

    while (sweeps < options.max_iter) {
        rng.shuffle(order.data(), order.size());
        int updates = 0;
        for (Eigen::Index i : order) {
            Eigen::Index arg_lo, arg_up;
            auto [best_lo, best_up] = scan_bounds(&arg_lo, &arg_up);
            if (best_lo - best_up <= options.tol) break;
            // Pair i with whichever global extreme violates most against it.
            double v_up = s.lower(i) - best_up;  // i supplies the lower bound
            double v_lo = best_lo - s.upper(i);  // i supplies the upper bound
            Eigen::Index p, q;
            if (v_up >= v_lo) {
                p = i;
                q = arg_up;
            } else {
                p = arg_lo;
                q = i;
            }
            if (p == q || std::max(v_up, v_lo) <= options.tol) {
                p = arg_lo;
                q = arg_up;
            }
            if (p != q && pair_update(s, p, q)) ++updates;
        }
        ++sweeps;

        // Refresh the maintained products so incremental drift cannot
        // accumulate across sweeps.
        s.w = X.transpose() * s.beta;
        s.g = X * s.w - y;

        double objective = s.objective();
        assert(objective <= prev_objective + 1e-9 * (1.0 + std::fabs(prev_objective)));
        prev_objective = objective;
        (void)prev_objective;

        Eigen::Index arg_lo, arg_up;
        auto [best_lo, best_up] = scan_bounds(&arg_lo, &arg_up);
        if (best_lo - best_up <= options.tol) {
            converged = true;
            model.bias = 0.5 * (best_lo + best_up);
            break;
        }
        if (updates == 0) break; // no improving pair found; cannot progress
    }

    if (!converged) {
        Eigen::Index arg_lo, arg_up;
        auto [best_lo, best_up] = scan_bounds(&arg_lo, &arg_up);
        double lo = std::isfinite(best_lo) ? best_lo : best_up;
        double up = std::isfinite(best_up) ? best_up : best_lo;
        model.bias = 0.5 * (lo + up);
    }

    model.weights = s.w;
    model.dual_coefs = s.beta;
    model.iterations_used = sweeps;
    model.converged = converged;
    return model;
}

double mae(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth) {
    if (predictions.size() != truth.size()) throw std::invalid_argument("mae: length mismatch");
    if (predictions.size() == 0) throw std::invalid_argument("mae: empty input");
    return (predictions - truth).array().abs().mean();
}

GridSearchResult grid_search(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                             const Eigen::MatrixXd& X_dev, const Eigen::VectorXd& y_dev,
                             std::vector<double> C_grid, double epsilon,
                             const FitOptions& options) {
    if (C_grid.empty()) throw std::invalid_argument("grid_search: empty C grid");
    std::sort(C_grid.begin(), C_grid.end());

    GridSearchResult result;
    result.scaler = Standardizer::fit(X_train, "train");
    Eigen::MatrixXd Xtr = result.scaler.transform(X_train);
    Eigen::MatrixXd Xdv = result.scaler.transform(X_dev);

    bool first = true;
    for (double C : C_grid) {
        LinearModel m = fit(Xtr, y_train, C, epsilon, options);
        double dev_mae = mae(m.predict(Xdv), y_dev);
        result.dev_curve.emplace_back(C, dev_mae);
        if (first || dev_mae < result.best_dev_mae) {
            first = false;
            result.best_dev_mae = dev_mae;
            result.best_C = C;
            result.best_model = std::move(m);
        }
    }
    return result;
}

FinalizeResult finalize_and_test(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                                 const Eigen::MatrixXd& X_dev, const Eigen::VectorXd& y_dev,
                                 const Eigen::MatrixXd& X_test, const Eigen::VectorXd& y_test,
                                 double best_C, double epsilon, const FitOptions& options) {
    if (X_train.cols() != X_dev.cols() || X_train.cols() != X_test.cols())
        throw std::invalid_argument("finalize_and_test: column mismatch");

    Eigen::MatrixXd X_full(X_train.rows() + X_dev.rows(), X_train.cols());
    X_full << X_train, X_dev;
    Eigen::VectorXd y_full(y_train.size() + y_dev.size());
    y_full << y_train, y_dev;

    FinalizeResult result;
    result.scaler = Standardizer::fit(X_full, "train+dev");
    result.model = fit(result.scaler.transform(X_full), y_full, best_C, epsilon, options);
    result.test_mae = mae(result.model.predict(result.scaler.transform(X_test)), y_test);
    return result;
}

std::vector<WeightReportRow> weight_report(const LinearModel& model,
                                           const std::map<std::string, double>& univariate_p,
                                           const std::vector<std::string>& all_features) {
    std::vector<WeightReportRow> rows;
    rows.reserve(all_features.size());
    for (const auto& name : all_features) {
        WeightReportRow row;
        row.feature = name;
        auto it = std::find(model.feature_names.begin(), model.feature_names.end(), name);
        if (it != model.feature_names.end()) {
            row.weight = model.weights[it - model.feature_names.begin()];
        } else {
            row.excluded = true;
        }
        auto pit = univariate_p.find(name);
        double p = pit != univariate_p.end() ? std::max(pit->second, 1e-300) : 1.0;
        row.scaled_p = -std::log10(p) / 10.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

bool KktReport::ok(double tol) const {
    return max_violation <= tol && max_inside_tube_dual <= tol;
}

KktReport kkt_check(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LinearModel& model,
                    double tol) {
    if (model.dual_coefs.size() != X.rows())
        throw std::invalid_argument("kkt_check: model was not fitted on this data");
    KktReport report;
    Eigen::VectorXd residual = model.predict(X) - y;
    const double C = model.C;
    const double eps = model.epsilon;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double b = model.dual_coefs[i];
        double r = residual[i];
        double violation = 0.0;
        if (b >= C) {
            violation = std::max(0.0, r + eps); // expected r <= -eps
        } else if (b <= -C) {
            violation = std::max(0.0, eps - r); // expected r >= eps
        } else if (b > 0.0) {
            violation = std::fabs(r + eps);
        } else if (b < 0.0) {
            violation = std::fabs(r - eps);
        } else {
            violation = std::max(0.0, std::fabs(r) - eps);
        }
        report.max_violation = std::max(report.max_violation, violation);
        if (std::fabs(r) < eps - tol)
            report.max_inside_tube_dual = std::max(report.max_inside_tube_dual, std::fabs(b));
    }
    return report;
}

double rel_change_pct(double all_mae, double variant_mae) {
    return (all_mae - variant_mae) / all_mae * 100.0;
}

double apply_rel_change(double all_mae, double rel_pct) {
    return all_mae * (1.0 - rel_pct / 100.0);
}

} // namespace engage
