#pragma once

// Core value types shared by the inference engine, the simulators and the
// evaluation code: feature grouping, regression data, hyperparameters and
// the EP state containers.

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgss/algebra.hpp"

namespace sgss {

// Raised when an input file or option cannot be interpreted.
struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when otherwise well-formed inputs disagree in shape.
struct dimension_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Assignment of N features to G groups.  Groups are indexed 0..G-1
// internally (file formats may carry arbitrary labels; see compact()).
// A group may be empty: the generators draw group indices uniformly and
// simply keep groups that received no feature.
class Grouping {
  public:
    Grouping(std::vector<int> assignment, int group_count)
        : assignment_(std::move(assignment)), group_count_(group_count) {
        if (group_count_ <= 0)
            throw dimension_error("Grouping: group count must be positive");
        for (int g : assignment_)
            if (g < 0 || g >= group_count_)
                throw dimension_error("Grouping: group index out of range");
        members_.resize(static_cast<std::size_t>(group_count_));
        for (std::size_t n = 0; n < assignment_.size(); ++n)
            members_[static_cast<std::size_t>(assignment_[n])].push_back(static_cast<int>(n));
    }

    // One group per feature (the ungrouped special case).
    static Grouping injective(int n_features) {
        std::vector<int> a(static_cast<std::size_t>(n_features));
        for (int i = 0; i < n_features; ++i) a[static_cast<std::size_t>(i)] = i;
        return Grouping(std::move(a), n_features);
    }

    // Remap arbitrary integer labels to 0..G-1 (sorted label order) and
    // report the mapping.  Used when ingesting grouping files.
    static Grouping compact(const std::vector<int>& labels, std::map<int, int>* mapping = nullptr) {
        std::vector<int> distinct(labels);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.empty())
            throw dimension_error("Grouping: no features");
        std::map<int, int> remap;
        for (std::size_t i = 0; i < distinct.size(); ++i) remap[distinct[i]] = static_cast<int>(i);
        std::vector<int> a;
        a.reserve(labels.size());
        for (int l : labels) a.push_back(remap[l]);
        if (mapping) *mapping = remap;
        return Grouping(std::move(a), static_cast<int>(distinct.size()));
    }

    int n_features() const { return static_cast<int>(assignment_.size()); }
    int n_groups() const { return group_count_; }
    int group_of(int feature) const { return assignment_[static_cast<std::size_t>(feature)]; }
    const std::vector<int>& members(int group) const { return members_[static_cast<std::size_t>(group)]; }
    const std::vector<int>& assignment() const { return assignment_; }

    bool is_injective() const {
        if (group_count_ != n_features()) return false;
        for (const auto& m : members_)
            if (m.size() != 1) return false;
        return true;
    }

  private:
    std::vector<int> assignment_;
    int group_count_;
    std::vector<std::vector<int>> members_;
};

// A regression instance.  center() subtracts the column means of X and the
// mean of y (the model carries no intercept; the offsets are kept so that
// predictions can be mapped back to the raw scale).
struct RegressionData {
    Eigen::MatrixXd x;       // M x N design
    Eigen::VectorXd y;       // M responses
    Eigen::VectorXd x_mean;  // column means removed from x (empty if not centered)
    double y_mean = 0.0;
    bool centered = false;

    RegressionData() = default;
    RegressionData(Eigen::MatrixXd x_in, Eigen::VectorXd y_in) : x(std::move(x_in)), y(std::move(y_in)) {
        if (x.rows() != y.size())
            throw dimension_error("RegressionData: X has " + std::to_string(x.rows()) + " rows but y has " +
                                  std::to_string(y.size()) + " entries");
        if (x.rows() == 0 || x.cols() == 0)
            throw dimension_error("RegressionData: empty design matrix");
    }

    int m() const { return static_cast<int>(x.rows()); }
    int n() const { return static_cast<int>(x.cols()); }

    RegressionData center() const {
        RegressionData out;
        out.x_mean = x.colwise().mean();
        out.y_mean = y.mean();
        out.x = x.rowwise() - out.x_mean.transpose();
        out.y = y.array() - out.y_mean;
        out.centered = true;
        return out;
    }

    // Intercept that maps coefficients fitted on centered data back to the
    // raw scale: y_hat = X_raw * beta + intercept.
    double intercept_for(const Eigen::VectorXd& beta) const {
        if (!centered) return 0.0;
        return y_mean - x_mean.dot(beta);
    }
};

// Model and solver settings.  p0/pi0 are the scalar prior inclusion
// probabilities; per-feature / per-group vectors override them when set.
struct Hyperparams {
    double sigma0 = 1.0;       // noise standard deviation
    double sigma_slab = 5.0;   // slab standard deviation
    double p0 = 0.5;           // prior feature inclusion probability
    double pi0 = 0.5;          // prior group inclusion probability
    double alpha0 = 0.9;       // initial damping weight on the new value
    double alpha_decay = 0.01; // per-sweep multiplicative decay of alpha
    double v_replace = 100.0;  // replacement for non-positive factor variances
    double tol = 1e-5;         // convergence threshold on the max parameter change
    int max_iter = 1000;
    Eigen::VectorXd p0_per_feature;  // optional, length N
    Eigen::VectorXd pi0_per_group;   // optional, length G

    // Settings used for network reconstruction, where many regressions run
    // back to back and a looser tolerance is sufficient.
    static Hyperparams network() {
        Hyperparams h;
        h.tol = 1e-3;
        h.max_iter = 100;
        return h;
    }

    Eigen::VectorXd p0_vector(int n) const {
        if (p0_per_feature.size() > 0) {
            if (p0_per_feature.size() != n)
                throw dimension_error("Hyperparams: p0 vector length does not match feature count");
            return p0_per_feature;
        }
        return Eigen::VectorXd::Constant(n, p0);
    }

    Eigen::VectorXd pi0_vector(int g) const {
        if (pi0_per_group.size() > 0) {
            if (pi0_per_group.size() != g)
                throw dimension_error("Hyperparams: pi0 vector length does not match group count");
            return pi0_per_group;
        }
        return Eigen::VectorXd::Constant(g, pi0);
    }

    void validate(int n, int g) const {
        if (!(sigma0 > 0.0)) throw std::invalid_argument("Hyperparams: sigma0 must be positive");
        if (!(sigma_slab > 0.0)) throw std::invalid_argument("Hyperparams: sigma_slab must be positive");
        if (!(v_replace > 0.0)) throw std::invalid_argument("Hyperparams: v_replace must be positive");
        if (!(alpha0 >= 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("Hyperparams: alpha0 must lie in [0,1]");
        if (!(alpha_decay >= 0.0 && alpha_decay <= 1.0))
            throw std::invalid_argument("Hyperparams: alpha_decay must lie in [0,1]");
        if (!(tol > 0.0)) throw std::invalid_argument("Hyperparams: tol must be positive");
        if (max_iter < 1) throw std::invalid_argument("Hyperparams: max_iter must be at least 1");
        const Eigen::VectorXd p = p0_vector(n);
        const Eigen::VectorXd q = pi0_vector(g);
        for (int i = 0; i < p.size(); ++i)
            if (!(p[i] > 0.0 && p[i] < 1.0))
                throw std::invalid_argument("Hyperparams: p0 must lie strictly inside (0,1)");
        for (int i = 0; i < q.size(); ++i)
            if (!(q[i] > 0.0 && q[i] < 1.0))
                throw std::invalid_argument("Hyperparams: pi0 must lie strictly inside (0,1)");
    }
};

// Site parameters of the four approximating factors.  The likelihood factor
// f1 is exact and constant, so only its natural parameters are stored.
struct FactorState {
    Eigen::MatrixXd v1_inv;     // N x N, X'X / sigma0^2
    Eigen::VectorXd v1_inv_m1;  // N, X'y / sigma0^2
    Eigen::VectorXd v2;         // f2 Gaussian site variances
    Eigen::VectorXd m2;         // f2 Gaussian site means
    Eigen::VectorXd r2;         // f2 Bernoulli site logits (features)
    Eigen::VectorXd r3;         // f3 Bernoulli site logits (features)
    Eigen::VectorXd rho3;       // f3 Bernoulli site logits (groups, one per feature)
    Eigen::VectorXd rho4;       // f4 Bernoulli site logits (groups)
};

// Moments of the approximate posterior Q.
struct PosteriorQ {
    Eigen::VectorXd m;    // posterior means of the coefficients
    Eigen::MatrixXd v;    // posterior covariance
    Eigen::VectorXd r;    // feature inclusion logits
    Eigen::VectorXd rho;  // group inclusion logits
};

struct FitResult {
    Eigen::VectorXd mean;          // posterior coefficient means
    Eigen::VectorXd feature_prob;  // P(feature active | data)
    Eigen::VectorXd group_prob;    // P(group active | data)
    int iterations = 0;
    bool converged = false;
    double max_delta = 0.0;  // last sweep's largest parameter change
    double intercept = 0.0;  // maps predictions back to the raw scale
};

}  // namespace sgss
