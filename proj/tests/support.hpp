#pragma once

// Shared helpers for the test suites: independent reference computations
// kept deliberately naive so they cannot share bugs with the library code.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "sgss/model.hpp"
#include "sgss/rng.hpp"

namespace testers {

// Plain triple-loop matrix product.
inline Eigen::MatrixXd naive_matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j)
            for (int k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
    return c;
}

// Central finite difference of a scalar function.
inline double fdiff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Log normalizer of the spike-and-slab tilt against a Gaussian cavity:
// log[ p_cav N(m | 0, v + slab_var) + (1 - p_cav) N(m | 0, v) ].
inline double tilt_log_normalizer(double m, double v, double p_cav, double slab_var) {
    const auto pdf = [](double x, double var) {
        return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * M_PI * var);
    };
    return std::log(p_cav * pdf(m, v + slab_var) + (1.0 - p_cav) * pdf(m, v));
}

// Dense instance with i.i.d. N(0,1) entries and a given sparse coefficient
// vector; used where the structure of the design does not matter.
struct DenseInstance {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd beta;
};

inline DenseInstance random_instance(int rows, int cols, const std::vector<std::pair<int, double>>& coeffs,
                                     double noise, sgss::Rng& rng) {
    DenseInstance inst;
    inst.x.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) inst.x(r, c) = rng.normal();
    inst.beta = Eigen::VectorXd::Zero(cols);
    for (const auto& [idx, value] : coeffs) inst.beta[idx] = value;
    inst.y = inst.x * inst.beta;
    for (int r = 0; r < rows; ++r) inst.y[r] += noise * rng.normal();
    return inst;
}

// Condition number of X'X via its eigenvalues.
inline double design_condition(const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd xtx = x.transpose() * x;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtx, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();
}

}  // namespace testers
