#pragma once

// Expectation-propagation engine for linear regression with a two-level
// (between-group / within-feature) spike-and-slab prior.
//
// The posterior over coefficients beta, feature indicators Z and group
// indicators Gamma is approximated by a product of four site factors:
//   f1 - the exact Gaussian likelihood term (constant, never refined),
//   f2 - per-feature Gaussian x Bernoulli sites coupling beta_n and Z_n,
//   f3 - per-feature Bernoulli sites coupling Z_n and Gamma_g(n),
//   f4 - the group prior sites (constant at logit(pi0)).
// Bernoulli messages live in logit space; Gaussian messages are damped in
// natural parameters.  One sweep refines all f2 sites (one joint Gaussian
// refresh), then all f3 sites (logit refresh only), so a sweep costs a
// single N x N (or M x M via the low-rank identity) factorisation.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "sgss/algebra.hpp"
#include "sgss/model.hpp"

namespace sgss {

struct CavityF2 {
    double v_cav = 0.0;
    double m_cav = 0.0;
    double r_cav = 0.0;
    // A cavity with non-positive or non-finite variance cannot be moment
    // matched; the feature keeps its old site this sweep.
    bool valid = false;
};

struct F2Update {
    double r2 = 0.0;
    double v2 = 0.0;
    double m2 = 0.0;
    bool skip = false;        // degenerate update, keep the old site
    bool replaced = false;    // variance guard fired (v2 == v_replace exactly)
};

struct CavityF3 {
    double r_cav = 0.0;    // feature logit with the f3 site removed
    double rho_cav = 0.0;  // group logit with the f3 site removed
};

struct F3Update {
    double rho3 = 0.0;
    double r3 = 0.0;
};

enum class RefreshMode { automatic, direct, woodbury };

namespace detail {

// log(exp(a) + exp(b)) with max-shift.
inline double log_sum_exp(double a, double b) {
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

inline void check_shapes(const RegressionData& data, const Grouping& grouping, const Hyperparams& hyper) {
    if (grouping.n_features() != data.n())
        throw dimension_error("fit: grouping covers " + std::to_string(grouping.n_features()) +
                              " features but the design has " + std::to_string(data.n()) + " columns");
    hyper.validate(data.n(), grouping.n_groups());
}

}  // namespace detail

// Moments (m, V) of Q given the current sites.  The direct route inverts the
// N x N natural-parameter matrix; the low-rank route uses the matrix
// inversion lemma and only factorises an M x M matrix, which wins when
// there are more features than observations.  Both produce the same result
// up to rounding.
inline void refresh_gaussian(const FactorState& fs, const RegressionData& data, const Hyperparams& hyper,
                             RefreshMode mode, Eigen::VectorXd& m_out, Eigen::MatrixXd& v_out) {
    const int n = static_cast<int>(fs.v2.size());
    const int m_rows = data.m();
    const bool use_direct = mode == RefreshMode::direct || (mode == RefreshMode::automatic && n <= m_rows);

    if (use_direct) {
        Eigen::MatrixXd a = fs.v1_inv;
        a.diagonal() += fs.v2.cwiseInverse();
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) {
            const Eigen::VectorXd d = a.diagonal();
            throw std::runtime_error(
                "refresh_q: natural-parameter matrix is not positive definite "
                "(diagonal range " +
                std::to_string(d.minCoeff()) + " .. " + std::to_string(d.maxCoeff()) + ")");
        }
        v_out = llt.solve(Eigen::MatrixXd::Identity(n, n));
    } else {
        const Eigen::MatrixXd w = data.x * fs.v2.asDiagonal();  // M x N, X diag(v2)
        Eigen::MatrixXd inner = w * data.x.transpose();         // X diag(v2) X'
        inner.diagonal().array() += hyper.sigma0 * hyper.sigma0;
        Eigen::LLT<Eigen::MatrixXd> llt(inner);
        if (llt.info() != Eigen::Success) {
            const Eigen::VectorXd d = inner.diagonal();
            throw std::runtime_error(
                "refresh_q: low-rank inner matrix is not positive definite "
                "(diagonal range " +
                std::to_string(d.minCoeff()) + " .. " + std::to_string(d.maxCoeff()) + ")");
        }
        v_out.noalias() = -w.transpose() * llt.solve(w);
        v_out.diagonal() += fs.v2;
    }
    v_out = 0.5 * (v_out + v_out.transpose()).eval();
    m_out.noalias() = v_out * (fs.v1_inv_m1 + fs.m2.cwiseQuotient(fs.v2));
}

// Bernoulli logits of Q from the sites: per-feature logits are the sum of
// the f2 and f3 sites; per-group logits add every member's f3 group message
// to the f4 prior site.
inline void refresh_logits(const FactorState& fs, const Grouping& grouping, Eigen::VectorXd& r_out,
                           Eigen::VectorXd& rho_out) {
    r_out = fs.r2 + fs.r3;
    rho_out = fs.rho4;
    for (int l = 0; l < grouping.n_features(); ++l) rho_out[grouping.group_of(l)] += fs.rho3[l];
}

inline PosteriorQ refresh_q(const FactorState& fs, const RegressionData& data, const Grouping& grouping,
                            const Hyperparams& hyper, RefreshMode mode = RefreshMode::automatic) {
    PosteriorQ q;
    refresh_gaussian(fs, data, hyper, mode, q.m, q.v);
    refresh_logits(fs, grouping, q.r, q.rho);
    return q;
}

// Starting state: f2 carries the prior mixture's effective variance
// sigma_slab^2 * p0 with zero mean, all Bernoulli sites sit at the prior
// log-odds, and Q's logits start at the prior log-odds as well (not at the
// site sums, which double-count the prior until the first sweep).
inline std::pair<FactorState, PosteriorQ> initialize(const RegressionData& data, const Grouping& grouping,
                                                     const Hyperparams& hyper,
                                                     RefreshMode mode = RefreshMode::automatic) {
    detail::check_shapes(data, grouping, hyper);
    const int n = data.n();
    const int g = grouping.n_groups();
    const Eigen::VectorXd p0 = hyper.p0_vector(n);
    const Eigen::VectorXd pi0 = hyper.pi0_vector(g);

    FactorState fs;
    const double inv_noise = 1.0 / (hyper.sigma0 * hyper.sigma0);
    fs.v1_inv.noalias() = data.x.transpose() * data.x * inv_noise;
    fs.v1_inv_m1.noalias() = data.x.transpose() * data.y * inv_noise;
    fs.v2 = hyper.sigma_slab * hyper.sigma_slab * p0;
    fs.m2 = Eigen::VectorXd::Zero(n);
    fs.r2.resize(n);
    fs.r3.resize(n);
    fs.rho3.resize(n);
    fs.rho4.resize(g);
    for (int i = 0; i < n; ++i) fs.r2[i] = fs.r3[i] = logit(p0[i]);
    for (int j = 0; j < g; ++j) fs.rho4[j] = logit(pi0[j]);
    for (int i = 0; i < n; ++i) fs.rho3[i] = fs.rho4[grouping.group_of(i)];

    PosteriorQ q;
    refresh_gaussian(fs, data, hyper, mode, q.m, q.v);
    q.r.resize(n);
    q.rho.resize(g);
    for (int i = 0; i < n; ++i) q.r[i] = logit(p0[i]);
    for (int j = 0; j < g; ++j) q.rho[j] = logit(pi0[j]);
    return {std::move(fs), std::move(q)};
}

// Remove feature n's f2 site from Q.  The quotient can produce a
// non-positive variance; such cavities are flagged invalid and the site is
// left untouched for this sweep.
inline CavityF2 cavity_f2(const PosteriorQ& q, const FactorState& fs, int n) {
    CavityF2 cav;
    const double v_nn = q.v(n, n);
    const double inv_cav = 1.0 / v_nn - 1.0 / fs.v2[n];
    cav.r_cav = q.r[n] - fs.r2[n];
    if (!(inv_cav > 0.0) || !std::isfinite(inv_cav)) return cav;
    cav.v_cav = 1.0 / inv_cav;
    cav.m_cav = cav.v_cav * (q.m[n] / v_nn - fs.m2[n] / fs.v2[n]);
    cav.valid = std::isfinite(cav.v_cav) && std::isfinite(cav.m_cav) && std::isfinite(cav.r_cav);
    return cav;
}

// Moment-match the spike-and-slab term against the cavity and divide the
// tilted moments back out.  a and b are the first two derivative statistics
// of the log normalizer; the site variance guard replaces a non-positive
// result by v_replace (exactly) and recomputes the site mean with the
// replaced value.
inline F2Update update_f2(const CavityF2& cav, const Hyperparams& hyper) {
    F2Update upd;
    if (!cav.valid) {
        upd.skip = true;
        return upd;
    }
    const double v = cav.v_cav;
    const double m = cav.m_cav;
    const double slab = hyper.sigma_slab * hyper.sigma_slab;
    const double v_slab = v + slab;

    const double r2_new = 0.5 * (std::log(v / v_slab) + m * m * (1.0 / v - 1.0 / v_slab));
    if (!std::isfinite(r2_new)) {
        upd.skip = true;
        return upd;
    }
    const double p_aux = sigmoid(r2_new + cav.r_cav);
    const double a = p_aux * m / v_slab + (1.0 - p_aux) * m / v;
    const double b = p_aux * (m * m - v_slab) / (v_slab * v_slab) + (1.0 - p_aux) * (m * m - v) / (v * v);
    const double denom = a * a - b;
    double v2_new = 1.0 / denom - v;
    if (!std::isfinite(v2_new)) {  // a^2 == b: the tilted and cavity variances coincide
        upd.skip = true;
        return upd;
    }
    if (v2_new <= 0.0) {
        v2_new = hyper.v_replace;
        upd.replaced = true;
    }
    const double m2_new = m - a * (v2_new + v);
    if (!std::isfinite(m2_new)) {
        upd.skip = true;
        return upd;
    }
    upd.r2 = r2_new;
    upd.v2 = v2_new;
    upd.m2 = m2_new;
    return upd;
}

// Remove feature n's f3 site from Q's logits.
inline CavityF3 cavity_f3(const PosteriorQ& q, const FactorState& fs, const Grouping& grouping, int n) {
    CavityF3 cav;
    cav.r_cav = q.r[n] - fs.r3[n];
    cav.rho_cav = q.rho[grouping.group_of(n)] - fs.rho3[n];
    return cav;
}

// Propagate between the feature and group levels.  The group message
// marginalises Z_n under the cavity; the feature message marginalises
// Gamma_g under the cavity.  p0_n = 0.5 admits shorter saturating forms and
// is the overwhelmingly common case, so it is special-cased.
inline F3Update update_f3(const CavityF3& cav, double p0_n) {
    F3Update upd;
    if (p0_n == 0.5) {
        upd.rho3 = std::log(0.5) + log1p_exp(cav.r_cav);
        upd.r3 = -std::log1p(2.0 * capped_exp(-cav.rho_cav));
    } else {
        // log(1 + p0 (e^{r_cav} - 1)), capped so the exponential stays finite.
        upd.rho3 = std::log1p(p0_n * std::expm1(std::min(cav.r_cav, logit_cap)));
        // log p0 - log(1 - p0 + e^{-rho_cav})
        upd.r3 = std::log(p0_n) - detail::log_sum_exp(std::log1p(-p0_n), -cav.rho_cav);
    }
    return upd;
}

// Damped site replacement.  Gaussian sites combine in natural parameters
// (precision and precision-mean); Bernoulli sites combine in logit space.
// alpha == 0 and alpha == 1 return the old/new values bit for bit.
inline void damp_gaussian_site(double alpha, double v_old, double m_old, double v_new, double m_new,
                               double& v_out, double& m_out) {
    if (alpha == 0.0) {
        v_out = v_old;
        m_out = m_old;
        return;
    }
    if (alpha == 1.0) {
        v_out = v_new;
        m_out = m_new;
        return;
    }
    const double eta = alpha / v_new + (1.0 - alpha) / v_old;
    const double theta = alpha * m_new / v_new + (1.0 - alpha) * m_old / v_old;
    v_out = 1.0 / eta;
    m_out = theta / eta;
}

inline double damp_logit(double alpha, double r_old, double r_new) {
    if (alpha == 0.0) return r_old;
    if (alpha == 1.0) return r_new;
    return alpha * r_new + (1.0 - alpha) * r_old;
}

// Run EP to convergence.  One sweep refines every f2 site from the
// sweep-start posterior (parallel schedule), refreshes Q, refines every f3
// site, refreshes the logits, and decays the damping weight.  Convergence
// is the largest absolute change of (m, diag V, r, rho) between sweeps.
inline FitResult fit(const RegressionData& data_in, const Grouping& grouping, const Hyperparams& hyper,
                     RefreshMode mode = RefreshMode::automatic) {
    detail::check_shapes(data_in, grouping, hyper);
    const RegressionData data = data_in.centered ? data_in : data_in.center();
    const int n = data.n();
    const Eigen::VectorXd p0 = hyper.p0_vector(n);

    auto [fs, q] = initialize(data, grouping, hyper, mode);

    Eigen::VectorXd prev_m = q.m;
    Eigen::VectorXd prev_vdiag = q.v.diagonal();
    Eigen::VectorXd prev_r = q.r;
    Eigen::VectorXd prev_rho = q.rho;

    FitResult res;
    double alpha = hyper.alpha0;
    for (int iter = 1; iter <= hyper.max_iter; ++iter) {
        // f2 phase: cavities and updates all read the sweep-start Q.
        for (int i = 0; i < n; ++i) {
            const CavityF2 cav = cavity_f2(q, fs, i);
            const F2Update upd = update_f2(cav, hyper);
            if (upd.skip) continue;
            damp_gaussian_site(alpha, fs.v2[i], fs.m2[i], upd.v2, upd.m2, fs.v2[i], fs.m2[i]);
            fs.r2[i] = damp_logit(alpha, fs.r2[i], upd.r2);
        }
        q = refresh_q(fs, data, grouping, hyper, mode);

        // f3 phase: cavities read the refreshed Q, updates touch only logits.
        for (int i = 0; i < n; ++i) {
            const CavityF3 cav = cavity_f3(q, fs, grouping, i);
            const F3Update upd = update_f3(cav, p0[i]);
            fs.rho3[i] = damp_logit(alpha, fs.rho3[i], upd.rho3);
            fs.r3[i] = damp_logit(alpha, fs.r3[i], upd.r3);
        }
        refresh_logits(fs, grouping, q.r, q.rho);

        alpha *= 1.0 - hyper.alpha_decay;

        double delta = 0.0;
        delta = std::max(delta, (q.m - prev_m).cwiseAbs().maxCoeff());
        delta = std::max(delta, (q.v.diagonal() - prev_vdiag).cwiseAbs().maxCoeff());
        delta = std::max(delta, (q.r - prev_r).cwiseAbs().maxCoeff());
        delta = std::max(delta, (q.rho - prev_rho).cwiseAbs().maxCoeff());
        prev_m = q.m;
        prev_vdiag = q.v.diagonal();
        prev_r = q.r;
        prev_rho = q.rho;

        res.iterations = iter;
        res.max_delta = delta;
        if (delta < hyper.tol) {
            res.converged = true;
            break;
        }
    }

    res.mean = q.m;
    res.feature_prob = q.r.unaryExpr([](double r) { return sigmoid(r); });
    res.group_prob = q.rho.unaryExpr([](double r) { return sigmoid(r); });
    res.intercept = data.intercept_for(res.mean);
    return res;
}

// Ungrouped spike-and-slab: every feature forms its own group, which makes
// the group level redundant and recovers the classic single-level model.
inline FitResult fit_ungrouped(const RegressionData& data, const Hyperparams& hyper,
                               RefreshMode mode = RefreshMode::automatic) {
    return fit(data, Grouping::injective(data.n()), hyper, mode);
}

}  // namespace sgss
