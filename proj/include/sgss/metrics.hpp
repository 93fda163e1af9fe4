#pragma once

// Ranking metrics (ROC / precision-recall), the cross-validated
// one-standard-error probability cutoff, and replicate aggregation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgss/ep.hpp"
#include "sgss/model.hpp"
#include "sgss/rng.hpp"

namespace sgss {

struct RankedPredictions {
    Eigen::VectorXd scores;
    std::vector<char> labels;  // 1 = positive

    int total() const { return static_cast<int>(labels.size()); }
    int positives() const {
        int k = 0;
        for (char l : labels) k += l != 0;
        return k;
    }
};

struct CurvePoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
    double precision = 0.0;
};

struct RocPr {
    std::vector<CurvePoint> points;  // one per distinct score, descending threshold
    double auroc = 0.0;
    double aupr = 0.0;
};

// Sweep the threshold over the distinct scores (ties move together as one
// step).  AUROC integrates TPR over FPR with the trapezoid rule, which
// matches the rank statistic with half credit for ties; AUPR integrates
// precision over recall as a step function, one step per threshold block.
inline RocPr roc_pr(const RankedPredictions& preds) {
    const int n = preds.total();
    if (n == 0 || preds.scores.size() != n)
        throw dimension_error("roc_pr: scores and labels must have equal, positive length");
    const int k = preds.positives();
    if (k == 0 || k == n)
        throw std::invalid_argument("roc_pr: need at least one positive and one negative label");
    for (int i = 0; i < n; ++i)
        if (std::isnan(preds.scores[i])) throw std::invalid_argument("roc_pr: scores must not be NaN");

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return preds.scores[a] > preds.scores[b]; });

    RocPr out;
    int tp = 0, fp = 0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = preds.scores[order[i]];
        while (i < order.size() && preds.scores[order[i]] == threshold) {
            if (preds.labels[static_cast<std::size_t>(order[i])]) ++tp;
            else ++fp;
            ++i;
        }
        CurvePoint pt;
        pt.threshold = threshold;
        pt.tpr = static_cast<double>(tp) / k;
        pt.fpr = static_cast<double>(fp) / (n - k);
        pt.precision = static_cast<double>(tp) / (tp + fp);
        out.auroc += (pt.fpr - prev_fpr) * (pt.tpr + prev_tpr) / 2.0;
        out.aupr += (pt.tpr - prev_tpr) * pt.precision;
        prev_fpr = pt.fpr;
        prev_tpr = pt.tpr;
        out.points.push_back(pt);
    }
    return out;
}

struct CvCurvePoint {
    double cutoff = 0.0;
    double mean_error = 0.0;
    double std_error = 0.0;
};

struct CvCutoff {
    double cutoff = 1.0;
    std::vector<CvCurvePoint> curve;
    int folds_used = 0;
    int folds_skipped = 0;  // folds whose held-out response was identically zero
};

namespace detail {

// Sparsified coefficients at a cutoff: keep the posterior mean where the
// inclusion probability reaches the cutoff.  The top grid point is the
// null model by construction (saturated probabilities can equal 1.0).
inline Eigen::VectorXd threshold_coefficients(const Eigen::VectorXd& mean, const Eigen::VectorXd& prob, double cutoff) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(mean.size());
    if (cutoff >= 1.0) return beta;
    for (int i = 0; i < mean.size(); ++i)
        if (prob[i] >= cutoff) beta[i] = mean[i];
    return beta;
}

}  // namespace detail

// K-fold cross-validation of the probability cutoff on the grid
// {0, 0.01, ..., 1}.  Each fold's error is the relative squared prediction
// error on the held-out rows; the chosen cutoff is the largest one whose
// mean error stays within one standard error of the minimum.
inline CvCutoff cv_cutoff_1se(const RegressionData& data, const Grouping& grouping, const Hyperparams& hyper,
                              int folds, std::uint64_t seed) {
    const int m = data.m();
    if (folds < 2) throw std::invalid_argument("cv_cutoff_1se: need at least 2 folds");
    if (folds > m) folds = m;

    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    rng.shuffle(perm);

    constexpr int grid_size = 101;
    const auto grid_value = [](int j) { return static_cast<double>(j) / (grid_size - 1); };

    std::vector<std::vector<double>> fold_errors(grid_size);
    int skipped = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<int> holdout, train;
        for (int i = 0; i < m; ++i)
            (i % folds == f ? holdout : train).push_back(perm[static_cast<std::size_t>(i)]);

        Eigen::MatrixXd x_tr(train.size(), data.n()), x_ho(holdout.size(), data.n());
        Eigen::VectorXd y_tr(train.size()), y_ho(holdout.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            x_tr.row(static_cast<int>(i)) = data.x.row(train[i]);
            y_tr[static_cast<int>(i)] = data.y[train[i]];
        }
        for (std::size_t i = 0; i < holdout.size(); ++i) {
            x_ho.row(static_cast<int>(i)) = data.x.row(holdout[i]);
            y_ho[static_cast<int>(i)] = data.y[holdout[i]];
        }

        const double denom = y_ho.squaredNorm();
        if (denom == 0.0) {
            ++skipped;
            continue;
        }
        const FitResult fit_res = fit(RegressionData(std::move(x_tr), std::move(y_tr)), grouping, hyper);
        for (int j = 0; j < grid_size; ++j) {
            const Eigen::VectorXd beta = detail::threshold_coefficients(fit_res.mean, fit_res.feature_prob, grid_value(j));
            fold_errors[static_cast<std::size_t>(j)].push_back((y_ho - x_ho * beta).squaredNorm() / denom);
        }
    }

    CvCutoff out;
    out.folds_skipped = skipped;
    out.folds_used = folds - skipped;
    if (out.folds_used < 2) throw std::runtime_error("cv_cutoff_1se: fewer than 2 usable folds");

    out.curve.resize(grid_size);
    int best = 0;
    for (int j = 0; j < grid_size; ++j) {
        const auto& e = fold_errors[static_cast<std::size_t>(j)];
        const double mean = std::accumulate(e.begin(), e.end(), 0.0) / e.size();
        double var = 0.0;
        for (double v : e) var += (v - mean) * (v - mean);
        var /= e.size() - 1;
        out.curve[static_cast<std::size_t>(j)] = {grid_value(j), mean, std::sqrt(var / e.size())};
        if (mean < out.curve[static_cast<std::size_t>(best)].mean_error) best = j;
    }
    const double limit = out.curve[static_cast<std::size_t>(best)].mean_error + out.curve[static_cast<std::size_t>(best)].std_error;
    for (int j = grid_size - 1; j >= 0; --j) {
        if (out.curve[static_cast<std::size_t>(j)].mean_error <= limit) {
            out.cutoff = grid_value(j);
            break;
        }
    }
    return out;
}

struct SummaryStats {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    int count = 0;
};

// Quantile with linear interpolation between order statistics (the common
// "type 7" definition).
inline double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw std::invalid_argument("quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Median and quartiles of each metric across replicates.  NaN entries
// (e.g. undefined prediction errors) are dropped per metric.
inline std::map<std::string, SummaryStats> aggregate_replicates(
    const std::vector<std::map<std::string, double>>& replicates) {
    std::map<std::string, std::vector<double>> collected;
    for (const auto& rep : replicates)
        for (const auto& [key, value] : rep)
            if (!std::isnan(value)) collected[key].push_back(value);
    std::map<std::string, SummaryStats> out;
    for (auto& [key, values] : collected) {
        SummaryStats s;
        s.count = static_cast<int>(values.size());
        s.median = quantile(values, 0.5);
        s.q1 = quantile(values, 0.25);
        s.q3 = quantile(values, 0.75);
        out[key] = s;
    }
    return out;
}

}  // namespace sgss
