#pragma once

// Scalar algebra for products and quotients of Bernoulli and Gaussian
// factors, written so that every operation is stable in logit space and
// in natural (precision) parameters.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sgss {

// Largest magnitude a logit may reach before it is fed to exp(); beyond
// this the probability is saturated anyway and exp() would overflow.
inline constexpr double logit_cap = 700.0;

inline double logit(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("logit: p must lie strictly inside (0,1)");
    return std::log(p) - std::log1p(-p);
}

// Numerically stable inverse logit; never overflows.
inline double sigmoid(double r) {
    if (r >= 0.0) return 1.0 / (1.0 + std::exp(-r));
    const double e = std::exp(r);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow for large |x|.
inline double log1p_exp(double x) {
    if (x > logit_cap) return x;
    return std::log1p(std::exp(std::min(x, logit_cap)));
}

// exp(x) with the argument capped so the result stays finite.
inline double capped_exp(double x) {
    return std::exp(std::min(std::max(x, -logit_cap), logit_cap));
}

enum class Combine { product, quotient };

// Product / quotient of two Bernoulli factors in logit space: both
// operations are plain addition/subtraction of log-odds.
inline double bern_combine_logit(double r1, double r2, Combine mode) {
    return mode == Combine::product ? r1 + r2 : r1 - r2;
}

struct Gaussian1D {
    double mean = 0.0;
    double var = 1.0;
};

// Product / quotient of two (unnormalised) Gaussian factors in natural
// parameters.  The product of densities keeps a positive variance; the
// quotient may legitimately return a negative "variance" (an unnormalised
// factor), which callers must handle.  Exact cancellation of precisions
// under the quotient leaves no Gaussian at all and is reported as an error.
inline Gaussian1D gauss_combine(const Gaussian1D& f1, const Gaussian1D& f2, Combine mode) {
    const double eta1 = 1.0 / f1.var;
    const double eta2 = 1.0 / f2.var;
    const double eta = mode == Combine::product ? eta1 + eta2 : eta1 - eta2;
    if (eta == 0.0)
        throw std::invalid_argument("gauss_combine: precisions cancel exactly (degenerate cavity)");
    const double theta = mode == Combine::product ? f1.mean * eta1 + f2.mean * eta2
                                                  : f1.mean * eta1 - f2.mean * eta2;
    return {theta / eta, 1.0 / eta};
}

// Density of N(x | mean, var); used by tests and the exact-enumeration code.
inline double normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

inline double normal_logpdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (d * d / var + std::log(2.0 * M_PI * var));
}

}  // namespace sgss
