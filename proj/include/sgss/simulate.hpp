#pragma once

// Synthetic signal-recovery instances: grouped designs with a k-sparse
// coefficient vector concentrated in a few groups, plus Gaussian noise.
//
// Draw order is part of the reproducibility contract.  For a given Rng:
//   gen_design        group index per feature, then design rows
//                     (row-major: all features of row 0, row 1, ...)
//   gen_coefficients  active groups, then active features, then values
//   gen_response      one noise draw per row
// make_signal_instance chains them in that order and then draws the test
// design and test response from the same stream.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sgss/model.hpp"
#include "sgss/rng.hpp"

namespace sgss {

enum class CorrStructure { independent, pairwise, groupwise };

struct ScenarioSpec {
    int m = 30;           // training observations
    int n = 30;           // features
    int g = 5;            // groups
    int k = 5;            // active features
    double sigma0 = 1.0;  // noise level used to generate responses
    CorrStructure corr = CorrStructure::independent;

    static ScenarioSpec small() { return {30, 30, 5, 5, 1.0, CorrStructure::independent}; }
    static ScenarioSpec medium() { return {30, 100, 20, 10, 1.0, CorrStructure::independent}; }
    static ScenarioSpec large() { return {100, 1000, 100, 10, 1.0, CorrStructure::independent}; }

    void validate() const {
        if (m < 1 || n < 1 || g < 1) throw std::invalid_argument("ScenarioSpec: m, n, g must be positive");
        if (k < 0 || k > n) throw std::invalid_argument("ScenarioSpec: k must lie in [0, n]");
        if (sigma0 < 0.0) throw std::invalid_argument("ScenarioSpec: sigma0 must be non-negative");
    }
};

struct SignalInstance {
    Eigen::MatrixXd x_train;
    Eigen::VectorXd y_train;
    Eigen::MatrixXd x_test;
    Eigen::VectorXd y_test;
    Eigen::VectorXd beta;
    std::vector<int> support;  // indices with beta != 0, ascending
    Grouping grouping{std::vector<int>{0}, 1};
};

namespace detail {

// Cholesky factor of the row covariance for the requested correlation
// structure; identity is signalled by an empty matrix so the independent
// case skips the multiply.
inline Eigen::MatrixXd row_covariance_chol(const ScenarioSpec& spec, const Grouping& grouping) {
    if (spec.corr == CorrStructure::independent) return {};
    Eigen::MatrixXd c;
    if (spec.corr == CorrStructure::pairwise) {
        c = Eigen::MatrixXd::Constant(spec.n, spec.n, 0.5);
    } else {
        c = Eigen::MatrixXd::Zero(spec.n, spec.n);
        for (int j = 0; j < grouping.n_groups(); ++j)
            for (int a : grouping.members(j))
                for (int b : grouping.members(j)) c(a, b) = 0.5;
    }
    c.diagonal().setOnes();
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("row_covariance_chol: covariance factorisation failed");
    return llt.matrixL();
}

}  // namespace detail

inline Grouping sample_grouping(const ScenarioSpec& spec, Rng& rng) {
    std::vector<int> assignment(static_cast<std::size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i)
        assignment[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.g)));
    return Grouping(std::move(assignment), spec.g);
}

// `rows` i.i.d. observations with the scenario's feature covariance.
inline Eigen::MatrixXd sample_design_rows(const ScenarioSpec& spec, const Grouping& grouping, int rows, Rng& rng) {
    Eigen::MatrixXd z(rows, spec.n);
    for (int r = 0; r < rows; ++r)
        for (int i = 0; i < spec.n; ++i) z(r, i) = rng.normal();
    const Eigen::MatrixXd l = detail::row_covariance_chol(spec, grouping);
    if (l.size() == 0) return z;
    return z * l.transpose();
}

inline std::pair<Eigen::MatrixXd, Grouping> gen_design(const ScenarioSpec& spec, Rng& rng) {
    spec.validate();
    Grouping grouping = sample_grouping(spec, rng);
    Eigen::MatrixXd x = sample_design_rows(spec, grouping, spec.m, rng);
    return {std::move(x), std::move(grouping)};
}

// k-sparse coefficients: values ~ U[-5, 5] on k features drawn from a few
// uniformly chosen groups (three, or fewer when the scenario has fewer
// groups).  Redraws the group choice until the chosen groups jointly hold
// at least k features; scenarios where even the largest groups cannot are
// rejected up front.
inline Eigen::VectorXd gen_coefficients(const ScenarioSpec& spec, const Grouping& grouping, Rng& rng) {
    spec.validate();
    const int n_active_groups = std::min(3, spec.g);

    std::vector<int> sizes(static_cast<std::size_t>(spec.g));
    for (int j = 0; j < spec.g; ++j) sizes[static_cast<std::size_t>(j)] = static_cast<int>(grouping.members(j).size());
    std::vector<int> sorted_sizes(sizes);
    std::sort(sorted_sizes.rbegin(), sorted_sizes.rend());
    int best = 0;
    for (int j = 0; j < n_active_groups; ++j) best += sorted_sizes[static_cast<std::size_t>(j)];
    if (best < spec.k)
        throw std::invalid_argument("gen_coefficients: no " + std::to_string(n_active_groups) +
                                    " groups jointly contain k = " + std::to_string(spec.k) + " features");

    std::vector<int> pool;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const std::vector<int> chosen = rng.sample_without_replacement(spec.g, n_active_groups);
        pool.clear();
        for (int j : chosen)
            for (int l : grouping.members(j)) pool.push_back(l);
        if (static_cast<int>(pool.size()) >= spec.k) break;
        pool.clear();
    }
    if (static_cast<int>(pool.size()) < spec.k)
        throw std::runtime_error("gen_coefficients: could not find groups holding k features");
    std::sort(pool.begin(), pool.end());

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(spec.n);
    const std::vector<int> picks = rng.sample_without_replacement(static_cast<int>(pool.size()), spec.k);
    for (int p : picks) beta[pool[static_cast<std::size_t>(p)]] = rng.uniform(-5.0, 5.0);
    return beta;
}

inline Eigen::VectorXd gen_response(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta, double sigma0, Rng& rng) {
    if (x.cols() != beta.size()) throw dimension_error("gen_response: beta length does not match design columns");
    Eigen::VectorXd y = x * beta;
    for (int r = 0; r < y.size(); ++r) y[r] += sigma0 * rng.normal();
    return y;
}

inline SignalInstance make_signal_instance(const ScenarioSpec& spec, std::uint64_t seed, int test_rows = 100) {
    spec.validate();
    if (test_rows < 1) throw std::invalid_argument("make_signal_instance: need at least one test row");
    Rng rng(seed);
    SignalInstance inst;
    inst.grouping = sample_grouping(spec, rng);
    inst.x_train = sample_design_rows(spec, inst.grouping, spec.m, rng);
    inst.beta = gen_coefficients(spec, inst.grouping, rng);
    inst.y_train = gen_response(inst.x_train, inst.beta, spec.sigma0, rng);
    inst.x_test = sample_design_rows(spec, inst.grouping, test_rows, rng);
    inst.y_test = gen_response(inst.x_test, inst.beta, spec.sigma0, rng);
    for (int i = 0; i < spec.n; ++i)
        if (inst.beta[i] != 0.0) inst.support.push_back(i);
    return inst;
}

// Relative squared prediction error: ||y - X beta_hat||^2 / ||y||^2.
// Undefined (NaN) when the test response is identically zero.
inline double signal_prediction_error(const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& x_test,
                                      const Eigen::VectorXd& y_test) {
    if (x_test.cols() != beta_hat.size())
        throw dimension_error("signal_prediction_error: beta length does not match design columns");
    if (x_test.rows() != y_test.size())
        throw dimension_error("signal_prediction_error: X and y row counts differ");
    const double denom = y_test.squaredNorm();
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (y_test - x_test * beta_hat).squaredNorm() / denom;
}

}  // namespace sgss
