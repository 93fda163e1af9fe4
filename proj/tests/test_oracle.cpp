#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "sgss/algebra.hpp"
#include "sgss/oracle.hpp"
#include "sgss/rng.hpp"
#include "support.hpp"

using namespace sgss;

namespace {

// Reference enumeration over the FULL (Z, Gamma) lattice, including the
// inconsistent configurations (which carry zero weight).  Slower and
// simpler than the library's group-collapsed enumeration; agreement of the
// two routes validates the collapse.
struct ExplicitOracle {
    Eigen::VectorXd feature_prob;
    Eigen::VectorXd group_prob;
    Eigen::VectorXd mean;
    double log_evidence;
};

ExplicitOracle explicit_enumeration(const RegressionData& data_in, const Grouping& grouping,
                                    const Hyperparams& hyper) {
    const RegressionData data = data_in.centered ? data_in : data_in.center();
    const int n = data.n();
    const int g = grouping.n_groups();
    const int m = data.m();
    const double noise = hyper.sigma0 * hyper.sigma0;
    const double slab = hyper.sigma_slab * hyper.sigma_slab;
    const Eigen::VectorXd p0 = hyper.p0_vector(n);
    const Eigen::VectorXd pi0 = hyper.pi0_vector(g);

    std::vector<double> weights;
    std::vector<std::size_t> zs, gams;
    std::vector<Eigen::VectorXd> means;
    double log_max = -1e300;
    std::vector<double> logs;

    for (std::size_t gam = 0; gam < (std::size_t{1} << g); ++gam) {
        for (std::size_t z = 0; z < (std::size_t{1} << n); ++z) {
            // Consistency: an active feature needs an active group.
            bool ok = true;
            for (int i = 0; i < n && ok; ++i)
                if ((z >> i & 1) && !(gam >> grouping.group_of(i) & 1)) ok = false;
            if (!ok) continue;

            double lp = 0.0;
            for (int j = 0; j < g; ++j) lp += std::log(gam >> j & 1 ? pi0[j] : 1.0 - pi0[j]);
            for (int i = 0; i < n; ++i) {
                if (gam >> grouping.group_of(i) & 1)
                    lp += std::log(z >> i & 1 ? p0[i] : 1.0 - p0[i]);
                // Inactive group: P(Z=0) = 1, contributes nothing.
            }

            // Marginal likelihood with the coefficients integrated out,
            // evaluated through the full M x M covariance (a different
            // route than the library's low-rank form).
            Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(m, m) * noise;
            std::vector<int> active;
            for (int i = 0; i < n; ++i)
                if (z >> i & 1) active.push_back(i);
            for (int a : active) cov += slab * data.x.col(a) * data.x.col(a).transpose();
            const Eigen::LLT<Eigen::MatrixXd> llt(cov);
            double log_det = 0.0;
            for (int i = 0; i < m; ++i) log_det += 2.0 * std::log(llt.matrixLLT()(i, i));
            const double quad = data.y.dot(llt.solve(data.y));
            const double log_lik = -0.5 * (m * std::log(2.0 * M_PI) + log_det + quad);

            // Conditional mean: slab X_S' cov^{-1} y.
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
            const Eigen::VectorXd cov_inv_y = llt.solve(data.y);
            for (int a : active) mean[a] = slab * data.x.col(a).dot(cov_inv_y);

            logs.push_back(lp + log_lik);
            zs.push_back(z);
            gams.push_back(gam);
            means.push_back(mean);
            log_max = std::max(log_max, logs.back());
        }
    }

    double norm = 0.0;
    for (double l : logs) norm += std::exp(l - log_max);

    ExplicitOracle out;
    out.feature_prob = Eigen::VectorXd::Zero(n);
    out.group_prob = Eigen::VectorXd::Zero(g);
    out.mean = Eigen::VectorXd::Zero(n);
    out.log_evidence = log_max + std::log(norm);
    for (std::size_t c = 0; c < logs.size(); ++c) {
        const double w = std::exp(logs[c] - log_max) / norm;
        for (int i = 0; i < n; ++i)
            if (zs[c] >> i & 1) out.feature_prob[i] += w;
        for (int j = 0; j < g; ++j)
            if (gams[c] >> j & 1) out.group_prob[j] += w;
        out.mean += w * means[c];
    }
    return out;
}

}  // namespace

TEST_CASE("collapsed enumeration equals the explicit (Z, Gamma) lattice") {
    Rng rng(42);
    for (int rep = 0; rep < 5; ++rep) {
        const int n = 5, m = 15;
        const testers::DenseInstance inst = testers::random_instance(m, n, {{0, 2.5}, {3, -1.5}}, 0.5, rng);
        const RegressionData data(inst.x, inst.y);
        const Grouping grouping({0, 0, 1, 1, 2}, 3);
        Hyperparams hyper;
        hyper.sigma_slab = 2.0;
        hyper.p0 = rep % 2 == 0 ? 0.5 : 0.3;
        hyper.pi0 = rep % 2 == 0 ? 0.5 : 0.7;

        const OraclePosterior fast = enumerate_posterior(data, grouping, hyper);
        const ExplicitOracle slow = explicit_enumeration(data, grouping, hyper);

        CHECK(std::abs(fast.log_evidence - slow.log_evidence) < 1e-8);
        CHECK((fast.feature_prob - slow.feature_prob).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((fast.group_prob - slow.group_prob).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((fast.mean - slow.mean).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("posterior marginals are proper probabilities") {
    Rng rng(9);
    const testers::DenseInstance inst = testers::random_instance(20, 6, {{1, 3.0}}, 1.0, rng);
    const Grouping grouping({0, 0, 0, 1, 1, 2}, 3);
    const OraclePosterior post = enumerate_posterior(RegressionData(inst.x, inst.y), grouping, Hyperparams());
    for (int i = 0; i < 6; ++i) {
        CHECK(post.feature_prob[i] >= 0.0);
        CHECK(post.feature_prob[i] <= 1.0);
    }
    for (int j = 0; j < 3; ++j) {
        CHECK(post.group_prob[j] >= 0.0);
        CHECK(post.group_prob[j] <= 1.0);
    }
    // The planted feature dominates; untouched groups stay below the prior
    // plus noise allowance.
    CHECK(post.feature_prob[1] > 0.9);
    CHECK(post.group_prob[0] > 0.9);
}

TEST_CASE("a feature can only be active when its group is") {
    // P(Z_n = 1) <= P(Gamma_g(n) = 1) must hold exactly in the enumeration.
    Rng rng(15);
    const testers::DenseInstance inst = testers::random_instance(12, 5, {{0, 2.0}, {4, -2.0}}, 1.0, rng);
    const Grouping grouping({0, 0, 1, 1, 1}, 2);
    const OraclePosterior post = enumerate_posterior(RegressionData(inst.x, inst.y), grouping, Hyperparams());
    for (int i = 0; i < 5; ++i)
        CHECK(post.feature_prob[i] <= post.group_prob[grouping.group_of(i)] + 1e-12);
}

TEST_CASE("empty groups keep their prior probability") {
    Rng rng(33);
    const testers::DenseInstance inst = testers::random_instance(10, 3, {{0, 2.0}}, 0.5, rng);
    const Grouping grouping({0, 0, 2}, 4);  // groups 1 and 3 are empty
    Hyperparams hyper;
    hyper.pi0 = 0.35;
    const OraclePosterior post = enumerate_posterior(RegressionData(inst.x, inst.y), grouping, hyper);
    CHECK(post.group_prob[1] == Catch::Approx(0.35).margin(1e-12));
    CHECK(post.group_prob[3] == Catch::Approx(0.35).margin(1e-12));
}

TEST_CASE("marginal likelihood validated by Monte Carlo") {
    // Fix a single configuration (all features of group 0 active) and
    // check the integrated likelihood against a long-run average of
    // exp(log N(y | X_S beta, noise)) over slab draws of beta.
    Rng rng(321);
    const int m = 8, n = 2;
    Eigen::MatrixXd x(m, n);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) x(r, c) = rng.normal();
    Eigen::VectorXd y(m);
    for (int r = 0; r < m; ++r) y[r] = 0.8 * x(r, 0) - 0.3 * x(r, 1) + 0.3 * rng.normal();

    const double noise = 1.0, slab = 1.5;

    // Analytic value via the library's low-rank route, extracted through a
    // deterministic prior: p0 ~ 1 forces the all-active configuration, so
    // log evidence ~ log marginal likelihood of the full set.
    // Instead compute it directly here with dense formulas:
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(m, m) * noise;
    cov += slab * x * x.transpose();
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    double log_det = 0.0;
    for (int i = 0; i < m; ++i) log_det += 2.0 * std::log(llt.matrixLLT()(i, i));
    const double analytic =
        -0.5 * (m * std::log(2.0 * M_PI) + log_det + y.dot(llt.solve(y)));

    // Monte Carlo over beta ~ N(0, slab I).
    const int draws = 400000;
    double log_max = -1e300;
    std::vector<double> logs(draws);
    for (int d = 0; d < draws; ++d) {
        Eigen::VectorXd beta(n);
        for (int c = 0; c < n; ++c) beta[c] = std::sqrt(slab) * rng.normal();
        const Eigen::VectorXd resid = y - x * beta;
        logs[static_cast<std::size_t>(d)] =
            -0.5 * (m * std::log(2.0 * M_PI * noise) + resid.squaredNorm() / noise);
        log_max = std::max(log_max, logs[static_cast<std::size_t>(d)]);
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - log_max);
    const double mc = log_max + std::log(acc / draws);

    CHECK(mc == Catch::Approx(analytic).margin(0.05));
}

TEST_CASE("tiny slab drives the posterior to the prior") {
    // With slab -> 0 every configuration explains the data equally badly,
    // so feature probabilities fall back to the two-level prior
    // p0 * P(Gamma = 1 | no evidence).
    Rng rng(77);
    Eigen::MatrixXd x(10, 2);
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 2; ++c) x(r, c) = rng.normal();
    Eigen::VectorXd y(10);
    for (int r = 0; r < 10; ++r) y[r] = rng.normal();
    Hyperparams hyper;
    hyper.sigma_slab = 1e-8;
    const Grouping grouping({0, 1}, 2);
    const OraclePosterior post = enumerate_posterior(RegressionData(x, y), grouping, hyper);
    // P(Z=1) = pi0 * p0 / normalisation over the three consistent states.
    const double expected = 0.5 * 0.5 / (0.5 * 0.5 + 0.5 * 0.5 + 0.5);
    CHECK(post.feature_prob[0] == Catch::Approx(expected).margin(1e-6));
    CHECK(post.feature_prob[1] == Catch::Approx(expected).margin(1e-6));
}

TEST_CASE("enumeration bound is enforced") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 21);
    Eigen::VectorXd y = Eigen::VectorXd::Random(5);
    CHECK_THROWS_AS(enumerate_posterior(RegressionData(x, y), Grouping::injective(21), Hyperparams()),
                    std::invalid_argument);
}
