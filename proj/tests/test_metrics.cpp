#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "sgss/metrics.hpp"
#include "sgss/rng.hpp"

using namespace sgss;

namespace {

// Independent AUROC oracle: the normalized Mann-Whitney statistic with half
// credit for tied scores.  The trapezoid integral must reproduce this.
double rank_auroc(const RankedPredictions& preds) {
    double u = 0.0;
    int pairs = 0;
    for (int p = 0; p < preds.total(); ++p) {
        if (!preds.labels[static_cast<std::size_t>(p)]) continue;
        for (int q = 0; q < preds.total(); ++q) {
            if (preds.labels[static_cast<std::size_t>(q)]) continue;
            ++pairs;
            if (preds.scores[p] > preds.scores[q]) u += 1.0;
            else if (preds.scores[p] == preds.scores[q]) u += 0.5;
        }
    }
    return u / pairs;
}

RankedPredictions make_preds(std::vector<double> scores, std::vector<char> labels) {
    RankedPredictions p;
    p.scores = Eigen::Map<Eigen::VectorXd>(scores.data(), static_cast<int>(scores.size()));
    p.labels = std::move(labels);
    return p;
}

}  // namespace

TEST_CASE("perfect ranking scores 1 on both curves") {
    const RocPr r = roc_pr(make_preds({0.9, 0.8, 0.7, 0.2, 0.1}, {1, 1, 1, 0, 0}));
    CHECK(r.auroc == 1.0);
    CHECK(r.aupr == 1.0);
}

TEST_CASE("fully reversed ranking") {
    const RocPr r = roc_pr(make_preds({4.0, 3.0, 2.0, 1.0}, {0, 0, 1, 1}));
    CHECK(r.auroc == 0.0);
    // Hand-computed: precision 1/3 over the first half of recall, 1/2 over
    // the second.
    CHECK(r.aupr == Catch::Approx(1.0 / 6.0 + 1.0 / 4.0).margin(1e-12));
}

TEST_CASE("hand-computed interleaved example") {
    const RocPr r = roc_pr(make_preds({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}));
    CHECK(r.auroc == Catch::Approx(0.75).margin(1e-12));
    CHECK(r.aupr == Catch::Approx(0.5 + 1.0 / 3.0).margin(1e-12));
    REQUIRE(r.points.size() == 4);
    CHECK(r.points[0].tpr == 0.5);
    CHECK(r.points[0].fpr == 0.0);
    CHECK(r.points[0].precision == 1.0);
    CHECK(r.points[3].tpr == 1.0);
    CHECK(r.points[3].fpr == 1.0);
}

TEST_CASE("tied scores move through the curve as one block") {
    const RocPr r = roc_pr(make_preds({1.0, 1.0, 0.0, 0.0}, {1, 0, 1, 0}));
    REQUIRE(r.points.size() == 2);  // two distinct thresholds
    CHECK(r.auroc == Catch::Approx(0.5).margin(1e-12));
    CHECK(r.aupr == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("constant scores give the chance-level values") {
    const RocPr r = roc_pr(make_preds({0.3, 0.3, 0.3, 0.3, 0.3}, {1, 0, 0, 1, 0}));
    CHECK(r.auroc == Catch::Approx(0.5).margin(1e-12));
    CHECK(r.aupr == Catch::Approx(2.0 / 5.0).margin(1e-12));
}

TEST_CASE("trapezoid AUROC equals the rank statistic") {
    Rng rng(2024);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 30;
        std::vector<double> scores(n);
        std::vector<char> labels(n);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            // Coarse grid forces plenty of ties.
            scores[static_cast<std::size_t>(i)] = rng.uniform_int(8) / 8.0;
            labels[static_cast<std::size_t>(i)] = static_cast<char>(rng.uniform() < 0.4);
            pos += labels[static_cast<std::size_t>(i)];
        }
        if (pos == 0 || pos == n) continue;
        const RankedPredictions preds = make_preds(scores, labels);
        CHECK(roc_pr(preds).auroc == Catch::Approx(rank_auroc(preds)).margin(1e-12));
    }
}

TEST_CASE("metrics are invariant under monotone score transforms") {
    Rng rng(7);
    const int n = 25;
    std::vector<double> scores(n);
    std::vector<char> labels(n);
    for (int i = 0; i < n; ++i) {
        scores[static_cast<std::size_t>(i)] = rng.uniform_int(6) / 3.0 - 1.0;
        labels[static_cast<std::size_t>(i)] = static_cast<char>(i % 3 == 0);
    }
    const RocPr base = roc_pr(make_preds(scores, labels));

    std::vector<double> affine(scores), expd(scores);
    for (double& s : affine) s = 2.0 * s + 3.0;
    for (double& s : expd) s = std::exp(s);
    const RocPr r_affine = roc_pr(make_preds(affine, labels));
    const RocPr r_exp = roc_pr(make_preds(expd, labels));

    CHECK(r_affine.auroc == base.auroc);
    CHECK(r_affine.aupr == base.aupr);
    CHECK(r_exp.auroc == base.auroc);
    CHECK(r_exp.aupr == base.aupr);
}

TEST_CASE("negating distinct scores flips AUROC") {
    Rng rng(99);
    const int n = 20;
    std::vector<double> scores(n);
    std::vector<char> labels(n);
    for (int i = 0; i < n; ++i) {
        scores[static_cast<std::size_t>(i)] = rng.normal();
        labels[static_cast<std::size_t>(i)] = static_cast<char>(i < 7);
    }
    std::vector<double> neg(scores);
    for (double& s : neg) s = -s;
    const double a = roc_pr(make_preds(scores, labels)).auroc;
    const double b = roc_pr(make_preds(neg, labels)).auroc;
    CHECK(a + b == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("degenerate ranking inputs are rejected") {
    CHECK_THROWS_AS(roc_pr(make_preds({}, {})), dimension_error);
    CHECK_THROWS_AS(roc_pr(make_preds({1.0, 2.0}, {1, 1})), std::invalid_argument);
    CHECK_THROWS_AS(roc_pr(make_preds({1.0, 2.0}, {0, 0})), std::invalid_argument);
    CHECK_THROWS_AS(roc_pr(make_preds({std::numeric_limits<double>::quiet_NaN(), 2.0}, {1, 0})),
                    std::invalid_argument);
}

TEST_CASE("cross-validated cutoff on a strong signal") {
    Rng rng(11);
    const int m = 48, n = 6;
    Eigen::MatrixXd x(m, n);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) x(r, c) = rng.normal();
    Eigen::VectorXd y(m);
    for (int r = 0; r < m; ++r) y[r] = 4.0 * x(r, 0) - 3.5 * x(r, 1) + 0.3 * rng.normal();

    const CvCutoff cv = cv_cutoff_1se(RegressionData(x, y), Grouping::injective(n), Hyperparams(), 5, 17);

    REQUIRE(cv.curve.size() == 101);
    CHECK(cv.folds_used == 5);
    CHECK(cv.folds_skipped == 0);
    CHECK(cv.cutoff >= 0.0);
    CHECK(cv.cutoff <= 1.0);

    // Endpoint identity: the top of the grid is the null model, whose
    // relative error is exactly 1 in every fold.
    CHECK(cv.curve.back().cutoff == 1.0);
    CHECK(cv.curve.back().mean_error == 1.0);
    CHECK(cv.curve.front().cutoff == 0.0);

    // The signal is near-noiseless, so some cutoff must beat the null model
    // decisively, and the chosen cutoff honours the one-standard-error rule:
    // it is the largest grid value within one SE of the minimum.
    int best = 0;
    for (int j = 1; j < 101; ++j)
        if (cv.curve[static_cast<std::size_t>(j)].mean_error < cv.curve[static_cast<std::size_t>(best)].mean_error)
            best = j;
    CHECK(cv.curve[static_cast<std::size_t>(best)].mean_error < 0.5);
    const double limit = cv.curve[static_cast<std::size_t>(best)].mean_error +
                         cv.curve[static_cast<std::size_t>(best)].std_error;
    const int chosen = static_cast<int>(std::lround(cv.cutoff * 100));
    CHECK(cv.curve[static_cast<std::size_t>(chosen)].mean_error <= limit);
    for (int j = chosen + 1; j < 101; ++j)
        CHECK(cv.curve[static_cast<std::size_t>(j)].mean_error > limit);
}

TEST_CASE("fold count is clamped and validated") {
    Rng rng(5);
    const int m = 8, n = 2;
    Eigen::MatrixXd x(m, n);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) x(r, c) = rng.normal();
    Eigen::VectorXd y = x.col(0) * 2.0;
    const RegressionData data(x, y);
    CHECK_THROWS_AS(cv_cutoff_1se(data, Grouping::injective(n), Hyperparams(), 1, 3),
                    std::invalid_argument);
    // More folds than rows degrades to leave-one-out rather than failing.
    const CvCutoff cv = cv_cutoff_1se(data, Grouping::injective(n), Hyperparams(), 50, 3);
    CHECK(cv.folds_used + cv.folds_skipped == m);
}

TEST_CASE("type-7 quantiles") {
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    CHECK(quantile(v, 0.5) == Catch::Approx(2.5).margin(1e-15));
    CHECK(quantile(v, 0.25) == Catch::Approx(1.75).margin(1e-15));
    CHECK(quantile(v, 0.75) == Catch::Approx(3.25).margin(1e-15));
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
    CHECK(quantile({42.0}, 0.5) == 42.0);
    CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("replicate aggregation drops NaN per metric") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::vector<std::map<std::string, double>> reps{
        {{"auroc", 0.9}, {"err", 0.2}},
        {{"auroc", 0.7}, {"err", nan}},
        {{"auroc", 0.8}, {"err", 0.4}},
    };
    const auto agg = aggregate_replicates(reps);
    CHECK(agg.at("auroc").count == 3);
    CHECK(agg.at("auroc").median == Catch::Approx(0.8));
    CHECK(agg.at("err").count == 2);
    CHECK(agg.at("err").median == Catch::Approx(0.3));
    CHECK(agg.at("err").q1 == Catch::Approx(0.25));
    CHECK(agg.at("err").q3 == Catch::Approx(0.35));
}
