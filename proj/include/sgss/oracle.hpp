#pragma once

// Exact posterior by brute-force enumeration, for validating the EP
// approximation on small problems.
//
// Conditioned on an active set S = {n : Z_n = 1}, the coefficients
// integrate out analytically and y | S ~ N(0, sigma0^2 I + slab^2 X_S X_S').
// The group indicators also sum out in closed form: a group with an active
// member must itself be active, while a fully inactive group contributes
// pi0 * prod(1 - p0) + (1 - pi0).  So a pass over the 2^N feature
// configurations yields the evidence and all marginals.  Likelihood
// evaluations go through the |S|-sized forms of the determinant and
// inversion lemmas, which keeps the enumeration independent of the solver's
// own linear algebra paths.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sgss/algebra.hpp"
#include "sgss/model.hpp"

namespace sgss {

// Enumeration is exponential in the feature count; refuse anything beyond
// this many features.
inline constexpr int oracle_max_features = 20;

struct OraclePosterior {
    Eigen::VectorXd feature_prob;
    Eigen::VectorXd mean;
    Eigen::VectorXd group_prob;
    double log_evidence = 0.0;
};

namespace detail {

// Compensated (Kahan) accumulator; enumeration order must not leak into
// the normalised marginals.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double t = x - carry;
        const double s = sum + t;
        carry = (s - sum) - t;
        sum = s;
    }
};

}  // namespace detail

inline OraclePosterior enumerate_posterior(const RegressionData& data_in, const Grouping& grouping,
                                           const Hyperparams& hyper) {
    if (grouping.n_features() != data_in.n())
        throw dimension_error("enumerate_posterior: grouping does not match the design's column count");
    hyper.validate(data_in.n(), grouping.n_groups());
    if (data_in.n() > oracle_max_features)
        throw std::invalid_argument("enumerate_posterior: enumeration is limited to " +
                                    std::to_string(oracle_max_features) + " features");

    const RegressionData data = data_in.centered ? data_in : data_in.center();
    const int n = data.n();
    const int g = grouping.n_groups();
    const int m = data.m();
    const Eigen::VectorXd p0 = hyper.p0_vector(n);
    const Eigen::VectorXd pi0 = hyper.pi0_vector(g);

    const double noise_var = hyper.sigma0 * hyper.sigma0;
    const double slab_var = hyper.sigma_slab * hyper.sigma_slab;
    const Eigen::MatrixXd xtx = data.x.transpose() * data.x;
    const Eigen::VectorXd xty = data.x.transpose() * data.y;
    const double yty = data.y.squaredNorm();
    const double log_lik_empty = -0.5 * (m * std::log(2.0 * M_PI * noise_var) + yty / noise_var);

    // Weight of the all-members-off configuration of each group, with the
    // two Gamma states summed out, and P(Gamma_g = 1) within it.
    std::vector<double> log_w_inactive(static_cast<std::size_t>(g));
    std::vector<double> p_gamma_inactive(static_cast<std::size_t>(g));
    for (int j = 0; j < g; ++j) {
        double prod_off = 1.0;
        for (int l : grouping.members(j)) prod_off *= 1.0 - p0[l];
        const double w_on = pi0[j] * prod_off;
        const double w = w_on + (1.0 - pi0[j]);
        log_w_inactive[static_cast<std::size_t>(j)] = std::log(w);
        p_gamma_inactive[static_cast<std::size_t>(j)] = w_on / w;
    }

    const std::size_t configs = std::size_t{1} << n;
    std::vector<int> active;
    active.reserve(static_cast<std::size_t>(n));
    std::vector<char> group_active(static_cast<std::size_t>(g));

    const auto decode = [&](std::size_t z) {
        active.clear();
        std::fill(group_active.begin(), group_active.end(), char{0});
        for (int i = 0; i < n; ++i) {
            if (z >> i & 1) {
                active.push_back(i);
                group_active[static_cast<std::size_t>(grouping.group_of(i))] = 1;
            }
        }
    };

    // Marginal likelihood and conditional coefficient mean for the decoded
    // active set:  |noise I + slab X_S X_S'| = noise^M |B| with
    // B = I + (slab/noise) X_S'X_S, the quadratic form reduces to an
    // |S|-sized solve, and E[beta_S | y, S] = (slab/noise) B^{-1} X_S'y.
    Eigen::VectorXd beta_s;
    const auto likelihood = [&](Eigen::VectorXd* beta_out) -> double {
        const int s = static_cast<int>(active.size());
        if (s == 0) {
            if (beta_out) beta_out->setZero();
            return log_lik_empty;
        }
        Eigen::MatrixXd b(s, s);
        Eigen::VectorXd u(s);
        for (int a = 0; a < s; ++a) {
            u[a] = xty[active[static_cast<std::size_t>(a)]];
            for (int c = 0; c < s; ++c)
                b(a, c) = slab_var / noise_var *
                          xtx(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(c)]);
            b(a, a) += 1.0;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(b);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("enumerate_posterior: inner matrix factorisation failed");
        const Eigen::VectorXd t = llt.solve(u);
        double log_det = 0.0;
        for (int a = 0; a < s; ++a) log_det += 2.0 * std::log(llt.matrixLLT()(a, a));
        const double quad = (yty - slab_var / noise_var * u.dot(t)) / noise_var;
        if (beta_out) {
            beta_s = slab_var / noise_var * t;
            beta_out->setZero();
            for (int a = 0; a < s; ++a) (*beta_out)[active[static_cast<std::size_t>(a)]] = beta_s[a];
        }
        return -0.5 * (m * std::log(2.0 * M_PI * noise_var) + log_det + quad);
    };

    const auto log_prior = [&]() {
        double lp = 0.0;
        for (int j = 0; j < g; ++j) {
            if (group_active[static_cast<std::size_t>(j)]) {
                lp += std::log(pi0[j]);
                for (int l : grouping.members(j)) {
                    bool on = false;
                    for (int a : active)
                        if (a == l) {
                            on = true;
                            break;
                        }
                    lp += std::log(on ? p0[l] : 1.0 - p0[l]);
                }
            } else {
                lp += log_w_inactive[static_cast<std::size_t>(j)];
            }
        }
        return lp;
    };

    // Pass 1: log weights and the evidence.
    std::vector<double> log_weight(configs);
    double log_max = -std::numeric_limits<double>::infinity();
    for (std::size_t z = 0; z < configs; ++z) {
        decode(z);
        log_weight[z] = log_prior() + likelihood(nullptr);
        log_max = std::max(log_max, log_weight[z]);
    }
    detail::KahanSum norm;
    for (std::size_t z = 0; z < configs; ++z) norm.add(std::exp(log_weight[z] - log_max));

    // Pass 2: normalised marginals (conditional means recomputed so the
    // enumeration never holds 2^N vectors at once).
    std::vector<detail::KahanSum> feat(static_cast<std::size_t>(n)), mean_acc(static_cast<std::size_t>(n)),
        grp(static_cast<std::size_t>(g));
    Eigen::VectorXd beta(n);
    for (std::size_t z = 0; z < configs; ++z) {
        decode(z);
        const double w = std::exp(log_weight[z] - log_max) / norm.sum;
        likelihood(&beta);
        for (int i : active) feat[static_cast<std::size_t>(i)].add(w);
        for (int i = 0; i < n; ++i) mean_acc[static_cast<std::size_t>(i)].add(w * beta[i]);
        for (int j = 0; j < g; ++j)
            grp[static_cast<std::size_t>(j)].add(
                w * (group_active[static_cast<std::size_t>(j)] ? 1.0 : p_gamma_inactive[static_cast<std::size_t>(j)]));
    }

    OraclePosterior out;
    out.log_evidence = log_max + std::log(norm.sum);
    out.feature_prob.resize(n);
    out.mean.resize(n);
    out.group_prob.resize(g);
    for (int i = 0; i < n; ++i) {
        out.feature_prob[i] = feat[static_cast<std::size_t>(i)].sum;
        out.mean[i] = mean_acc[static_cast<std::size_t>(i)].sum;
    }
    for (int j = 0; j < g; ++j) out.group_prob[j] = grp[static_cast<std::size_t>(j)].sum;
    return out;
}

}  // namespace sgss
