#include <doctest.h>

#include <cmath>
#include <numeric>

#include "engage/rng.hpp"
#include "engage/svr.hpp"
#include "oracles.hpp"

using namespace engage;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int n, int d) {
    Eigen::MatrixXd X(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = rng.normal(0, 1);
    return X;
}

} // namespace

TEST_CASE("noiseless linear recovery") {
    Rng rng(1001);
    const int n = 80;
    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.uniform(-2.0, 2.0);
        y[i] = 2.0 * X(i, 0) + 1.0;
    }
    LinearModel m = fit(X, y, 1.0, 0.01);
    CHECK(m.converged);
    CHECK(std::fabs(m.weights[0] - 2.0) <= 0.05);
    CHECK(std::fabs(m.bias - 1.0) <= 0.05);

    // Multi-feature version.
    const int d = 6;
    Eigen::MatrixXd X2 = random_matrix(rng, 150, d);
    Eigen::VectorXd w_true(d);
    for (int j = 0; j < d; ++j) w_true[j] = rng.uniform(-2.0, 2.0);
    Eigen::VectorXd y2 = X2 * w_true;
    y2.array() += 0.7;
    LinearModel m2 = fit(X2, y2, 1.0, 0.01);
    CHECK(m2.converged);
    for (int j = 0; j < d; ++j) CHECK(std::fabs(m2.weights[j] - w_true[j]) <= 0.05);
    CHECK(std::fabs(m2.bias - 0.7) <= 0.05);
}

TEST_CASE("constant target collapses to the bias") {
    Rng rng(77);
    Eigen::MatrixXd X = random_matrix(rng, 40, 5);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(40, 3.25);
    for (double C : {1e-4, 1.0}) {
        LinearModel m = fit(X, y, C, 0.1);
        CHECK(m.converged);
        CHECK(m.weights.cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(std::fabs(m.bias - 3.25) <= m.epsilon + 1e-9);
    }
}

TEST_CASE("fit input validation") {
    Rng rng(3);
    Eigen::MatrixXd X = random_matrix(rng, 10, 2);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
    CHECK_THROWS_AS(fit(X.topRows(1), y.head(1), 1.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(fit(X, y, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(fit(X, y, 1.0, -0.1), std::invalid_argument);
    Eigen::VectorXd bad = y;
    bad[3] = std::nan("");
    CHECK_THROWS_AS(fit(X, bad, 1.0, 0.1), std::invalid_argument);
}

TEST_CASE("agreement with the independent QP reference solver") {
    Rng rng(20260101);
    const double epsilon = 0.1;
    const double C_values[] = {0.01, 0.1, 1.0};
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 200, d = 24;
        Eigen::MatrixXd X = random_matrix(rng, n, d);
        Eigen::VectorXd w_true(d);
        for (int j = 0; j < d; ++j) w_true[j] = rng.uniform(-1.5, 1.5);
        Eigen::VectorXd y = X * w_true;
        for (int i = 0; i < n; ++i) y[i] += rng.normal(0.0, 0.5) + 0.3;

        double C = C_values[trial % 3];
        FitOptions options;
        options.seed = 1000 + static_cast<std::uint64_t>(trial);
        LinearModel m = fit(X, y, C, epsilon, options);
        CHECK(m.converged);

        oracle::SvrSolution ref = oracle::solve_svr_reference(X, y, C, epsilon);
        Eigen::VectorXd pred_impl = m.predict(X);
        Eigen::VectorXd pred_ref = (X * ref.w).array() + ref.bias;
        double disagreement = mae(pred_impl, pred_ref);
        CAPTURE(trial);
        CAPTURE(C);
        CAPTURE(ref.gap);
        CHECK(disagreement <= 1e-3);
    }
}

TEST_CASE("KKT conditions hold at convergence") {
    Rng rng(424242);
    const double tol = 1e-4;
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 120, d = 10;
        Eigen::MatrixXd X = random_matrix(rng, n, d);
        Eigen::VectorXd y = X.col(0) * 2.0;
        for (int i = 0; i < n; ++i) y[i] += rng.normal(0.0, 0.4);
        LinearModel m = fit(X, y, 0.5, 0.1, {tol, 10000, 7u});
        REQUIRE(m.converged);
        KktReport report = kkt_check(X, y, m, tol);
        CHECK(report.max_violation <= 2.0 * tol);
        // Points strictly inside the tube carry no dual contribution.
        CHECK(report.max_inside_tube_dual <= 1e-9);
    }
}

TEST_CASE("prediction invariance under feature permutation") {
    Rng rng(99);
    const int n = 60, d = 8;
    Eigen::MatrixXd X = random_matrix(rng, n, d);
    Eigen::VectorXd y = X.col(1) - 0.5 * X.col(4);
    for (int i = 0; i < n; ++i) y[i] += rng.normal(0, 0.2);

    FitOptions tight{1e-11, 10000, 1u};
    LinearModel m = fit(X, y, 1.0, 0.1, tight);

    std::vector<int> perm = {3, 0, 7, 1, 5, 2, 6, 4};
    Eigen::MatrixXd Xp(n, d);
    for (int j = 0; j < d; ++j) Xp.col(j) = X.col(perm[static_cast<std::size_t>(j)]);
    LinearModel mp = fit(Xp, y, 1.0, 0.1, tight);

    Eigen::VectorXd pred = m.predict(X);
    Eigen::VectorXd pred_p = mp.predict(Xp);
    CHECK((pred - pred_p).cwiseAbs().maxCoeff() <= 1e-10);
    for (int j = 0; j < d; ++j)
        CHECK(std::fabs(mp.weights[j] - m.weights[perm[static_cast<std::size_t>(j)]]) <= 1e-9);
}

TEST_CASE("fit is deterministic for fixed seed") {
    Rng rng(500);
    Eigen::MatrixXd X = random_matrix(rng, 90, 12);
    Eigen::VectorXd y = X.col(2);
    for (int i = 0; i < 90; ++i) y[i] += rng.normal(0, 0.3);
    LinearModel a = fit(X, y, 0.1, 0.1, {1e-4, 10000, 11u});
    LinearModel b = fit(X, y, 0.1, 0.1, {1e-4, 10000, 11u});
    CHECK(a.bias == b.bias);
    CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.iterations_used == b.iterations_used);
}

TEST_CASE("mae properties") {
    Eigen::VectorXd a(2), b(2);
    a << 1, 2;
    b << 1, 2;
    CHECK(mae(a, b) == 0.0);
    a << 0, 0;
    b << 1, 3;
    CHECK(mae(a, b) == doctest::Approx(2.0));
    CHECK(mae(a, b) == mae(b, a));
    Eigen::VectorXd ac = a.array() + 5.0, bc = b.array() + 5.0;
    CHECK(mae(ac, bc) == doctest::Approx(mae(a, b)));

    Eigen::VectorXd bad(3);
    CHECK_THROWS_AS(mae(a, bad), std::invalid_argument);

    // Paired permutation invariance.
    Rng rng(8);
    Eigen::VectorXd x(50), z(50);
    for (int i = 0; i < 50; ++i) {
        x[i] = rng.normal(0, 1);
        z[i] = rng.normal(0, 1);
    }
    std::vector<int> idx(50);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx.data(), idx.size());
    Eigen::VectorXd xs(50), zs(50);
    for (int i = 0; i < 50; ++i) {
        xs[i] = x[idx[static_cast<std::size_t>(i)]];
        zs[i] = z[idx[static_cast<std::size_t>(i)]];
    }
    CHECK(mae(xs, zs) == doctest::Approx(mae(x, z)).epsilon(1e-12));
}

TEST_CASE("standardizer") {
    Rng rng(4);
    Eigen::MatrixXd X = random_matrix(rng, 50, 3);
    X.col(2).setConstant(9.0); // zero variance
    Standardizer s = Standardizer::fit(X, "train");
    Eigen::MatrixXd Z = s.transform(X);
    for (int j = 0; j < 2; ++j) {
        CHECK(std::fabs(Z.col(j).mean()) < 1e-12);
        CHECK(std::sqrt((Z.col(j).array() - Z.col(j).mean()).square().mean()) ==
              doctest::Approx(1.0));
    }
    CHECK(Z.col(2).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(s.zero_std_columns.size() == 1);
    CHECK(s.zero_std_columns[0] == 2);
    CHECK(s.fitted_on == "train");
}

TEST_CASE("grid_search picks the dev-best C with ties to the smaller value") {
    Rng rng(606);
    const int n = 120, d = 5;
    Eigen::MatrixXd X = random_matrix(rng, n, d);
    Eigen::VectorXd y = X * Eigen::VectorXd::Constant(d, 1.0);
    for (int i = 0; i < n; ++i) y[i] += rng.normal(0, 0.3);

    Eigen::MatrixXd Xtr = X.topRows(80), Xdev = X.bottomRows(40);
    Eigen::VectorXd ytr = y.head(80), ydev = y.tail(40);

    GridSearchResult gs = grid_search(Xtr, ytr, Xdev, ydev, {1e-7, 1e-4, 1e-1, 1.0}, 0.1);
    CHECK(gs.dev_curve.size() == 4);
    double best = gs.dev_curve[0].second;
    for (const auto& [C, dev_mae] : gs.dev_curve) best = std::min(best, dev_mae);
    CHECK(gs.best_dev_mae == doctest::Approx(best));
    // Tiny C underfits badly here, so the winner is one of the larger values.
    CHECK(gs.best_C > 1e-7);

    GridSearchResult single = grid_search(Xtr, ytr, Xdev, ydev, {0.01}, 0.1);
    CHECK(single.best_C == 0.01);

    CHECK_THROWS_AS(grid_search(Xtr, ytr, Xdev, ydev, {}, 0.1), std::invalid_argument);
}

TEST_CASE("finalize_and_test refits on train+dev and scores raw targets") {
    Rng rng(9090);
    const int n = 90, d = 4;
    Eigen::MatrixXd X = random_matrix(rng, n, d);
    Eigen::VectorXd w_true(d);
    for (int j = 0; j < d; ++j) w_true[j] = rng.uniform(-1, 1);
    Eigen::VectorXd y = X * w_true;
    y.array() += 100.0; // large offset: targets stay in raw units

    Eigen::MatrixXd Xtr = X.topRows(50), Xdev = X.middleRows(50, 20), Xte = X.bottomRows(20);
    Eigen::VectorXd ytr = y.head(50), ydev = y.segment(50, 20), yte = y.tail(20);

    FinalizeResult fin = finalize_and_test(Xtr, ytr, Xdev, ydev, Xte, yte, 1.0, 0.01);
    CHECK(fin.scaler.fitted_on == "train+dev");
    CHECK(fin.scaler.means.size() == d);
    CHECK(fin.test_mae <= 0.1); // noiseless linear data memorizes

    // Memorization bound: testing on the training data itself.
    FinalizeResult self = finalize_and_test(Xtr, ytr, Xdev, ydev, Xtr, ytr, 1.0, 0.01);
    CHECK(self.test_mae <= 0.01 + 1e-6);
}

TEST_CASE("weight_report") {
    LinearModel m;
    m.feature_names = {"A_std", "A_peaks"};
    m.weights = Eigen::Vector2d(0.5, -1.25);
    std::map<std::string, double> pvals = {
        {"A_std", 0.01}, {"A_peaks", 1.0}, {"A_q05", 0.5}};
    auto rows = weight_report(m, pvals, {"A_std", "A_q05", "A_peaks"});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].feature == "A_std");
    CHECK(rows[0].weight == 0.5);
    CHECK(rows[0].scaled_p == doctest::Approx(0.2)); // -log10(0.01)/10
    CHECK_FALSE(rows[0].excluded);
    CHECK(rows[1].feature == "A_q05");
    CHECK(rows[1].weight == 0.0);
    CHECK(rows[1].excluded);
    CHECK(rows[2].scaled_p == doctest::Approx(0.0)); // p = 1

    // p floored at 1e-300
    std::map<std::string, double> tiny = {{"A_std", 0.0}, {"A_peaks", 0.0}, {"A_q05", 0.0}};
    auto capped = weight_report(m, tiny, {"A_std"});
    CHECK(capped[0].scaled_p == doctest::Approx(30.0));
}

TEST_CASE("relative-change arithmetic matches the reporting convention") {
    CHECK(rel_change_pct(2.0, 1.5) == doctest::Approx(25.0)); // improvement is positive
    CHECK(rel_change_pct(2.0, 2.5) == doctest::Approx(-25.0));
    CHECK(apply_rel_change(2.0, 25.0) == doctest::Approx(1.5));
    // Round-trip.
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        double all = rng.uniform(0.1, 300.0);
        double variant = rng.uniform(0.05, 300.0);
        CHECK(apply_rel_change(all, rel_change_pct(all, variant)) ==
              doctest::Approx(variant).epsilon(1e-12));
    }
}
