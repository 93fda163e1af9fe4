#pragma once

// Network reconstruction benchmark: a scale-free graph generator with hub
// nodes organised in groups, a mapping from graphs to Gaussian samples via
// a diagonally dominant precision matrix, and neighborhood selection (one
// sparse regression per node) to recover the edge set.
//
// Graph generator draw order (reproducibility contract): group weights,
// hub node choice, hub group assignment, then per node in index order the
// anchor-group/anchor-hub draws, the intra-group hub coin flips (hubs in
// index order) and the global random-edge coin flips (hubs in index order).

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sgss/ep.hpp"
#include "sgss/model.hpp"
#include "sgss/rng.hpp"

namespace sgss {

struct NetworkGraph {
    int node_count = 0;
    int group_count = 0;
    std::vector<std::pair<int, int>> edges;  // a < b, sorted, unique
    std::vector<int> hubs;                   // ascending node indices
    std::vector<char> is_hub;                // length node_count
    std::vector<int> node_groups;            // hubs: assigned group; others: anchor group
};

// Scale-free-ish graph: hubs are spread over groups with uniform weights;
// every non-hub anchors to one hub of a categorically drawn group, may
// attach to the remaining hubs of that group with probability 1/2 each,
// and any node gains shortcut edges to arbitrary hubs with probability q.
inline NetworkGraph gen_scale_free_graph(int p, int g, int h, double q, Rng& rng) {
    if (p < 1 || g < 1) throw std::invalid_argument("gen_scale_free_graph: need positive node and group counts");
    if (h < 1 || h > p) throw std::invalid_argument("gen_scale_free_graph: hub count must lie in [1, node count]");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("gen_scale_free_graph: q must lie in [0, 1]");

    NetworkGraph graph;
    graph.node_count = p;
    graph.group_count = g;
    graph.is_hub.assign(static_cast<std::size_t>(p), 0);
    graph.node_groups.assign(static_cast<std::size_t>(p), -1);

    // Group weights.
    std::vector<double> weights(static_cast<std::size_t>(g));
    double total = 0.0;
    for (int j = 0; j < g; ++j) {
        weights[static_cast<std::size_t>(j)] = rng.uniform();
        total += weights[static_cast<std::size_t>(j)];
    }
    if (total == 0.0) {
        std::fill(weights.begin(), weights.end(), 1.0);
        total = static_cast<double>(g);
    }
    for (double& w : weights) w /= total;

    // Hub choice and group assignment.
    graph.hubs = rng.sample_without_replacement(p, h);
    std::sort(graph.hubs.begin(), graph.hubs.end());
    for (int hub : graph.hubs) {
        graph.is_hub[static_cast<std::size_t>(hub)] = 1;
        graph.node_groups[static_cast<std::size_t>(hub)] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(g)));
    }
    std::vector<std::vector<int>> hubs_in_group(static_cast<std::size_t>(g));
    for (int hub : graph.hubs) hubs_in_group[static_cast<std::size_t>(graph.node_groups[static_cast<std::size_t>(hub)])].push_back(hub);

    const auto draw_group = [&]() {
        // Categorical over the weights, resampled until the group has a hub.
        for (;;) {
            double u = rng.uniform();
            int j = g - 1;
            for (int c = 0; c < g; ++c) {
                u -= weights[static_cast<std::size_t>(c)];
                if (u < 0.0) {
                    j = c;
                    break;
                }
            }
            if (!hubs_in_group[static_cast<std::size_t>(j)].empty()) return j;
        }
    };

    std::set<std::pair<int, int>> edges;
    const auto add_edge = [&](int a, int b) {
        if (a == b) return;
        edges.insert({std::min(a, b), std::max(a, b)});
    };

    for (int node = 0; node < p; ++node) {
        int anchor_group;
        int anchor_hub = -1;
        if (!graph.is_hub[static_cast<std::size_t>(node)]) {
            anchor_group = draw_group();
            graph.node_groups[static_cast<std::size_t>(node)] = anchor_group;
            const auto& pool = hubs_in_group[static_cast<std::size_t>(anchor_group)];
            anchor_hub = pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
            add_edge(node, anchor_hub);
        } else {
            anchor_group = graph.node_groups[static_cast<std::size_t>(node)];
        }
        for (int hub : hubs_in_group[static_cast<std::size_t>(anchor_group)]) {
            if (hub == node || hub == anchor_hub) continue;
            if (rng.uniform() < 0.5) add_edge(node, hub);
        }
        for (int hub : graph.hubs) {
            if (hub == node) continue;
            if (rng.uniform() < q) add_edge(node, hub);
        }
    }
    graph.edges.assign(edges.begin(), edges.end());
    return graph;
}

struct GaussianNetworkData {
    Eigen::MatrixXd x_train;
    Eigen::MatrixXd x_test;
    Eigen::MatrixXd precision;
};

// Gaussian data whose conditional independence structure is the graph:
// signed edge weights (magnitude U[0.5, 1], random sign, drawn per edge in
// sorted edge order: magnitude then sign), shifted to be positive definite
// with smallest eigenvalue 0.1, rescaled to unit diagonal, then rows are
// sampled as L z with L the Cholesky factor of the inverted precision.
inline GaussianNetworkData graph_to_gaussian(const NetworkGraph& graph, int m_train, int m_test, Rng& rng) {
    if (m_train < 1 || m_test < 0) throw std::invalid_argument("graph_to_gaussian: bad sample sizes");
    const int p = graph.node_count;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
    for (const auto& [i, j] : graph.edges) {
        const double magnitude = rng.uniform(0.5, 1.0);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        a(i, j) = a(j, i) = sign * magnitude;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw std::runtime_error("graph_to_gaussian: eigenvalue computation failed");
    const double shift = std::abs(eig.eigenvalues().minCoeff()) + 0.1;

    Eigen::MatrixXd omega = a;
    omega.diagonal().array() += shift;
    const Eigen::VectorXd d_inv_sqrt = omega.diagonal().cwiseSqrt().cwiseInverse();
    omega = d_inv_sqrt.asDiagonal() * omega * d_inv_sqrt.asDiagonal();

    Eigen::LLT<Eigen::MatrixXd> llt_omega(omega);
    if (llt_omega.info() != Eigen::Success)
        throw std::runtime_error("graph_to_gaussian: precision matrix is not positive definite");
    Eigen::MatrixXd sigma = llt_omega.solve(Eigen::MatrixXd::Identity(p, p));
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt_sigma(sigma);
    if (llt_sigma.info() != Eigen::Success)
        throw std::runtime_error("graph_to_gaussian: covariance factorisation failed");
    const Eigen::MatrixXd l = llt_sigma.matrixL();

    const auto sample_rows = [&](int rows) {
        Eigen::MatrixXd z(rows, p);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < p; ++c) z(r, c) = rng.normal();
        return Eigen::MatrixXd(z * l.transpose());
    };

    GaussianNetworkData out;
    out.x_train = sample_rows(m_train);
    out.x_test = sample_rows(m_test);
    out.precision = std::move(omega);
    return out;
}

enum class FeatureMode { hubs_only, all_nodes };
enum class GroupingMode { original, random };
enum class Symmetrize { max_rule, min_rule };

// Per-node metadata needed by neighborhood selection; a NetworkGraph
// carries it, and it can equally be read back from a nodes file.
struct NodeInfo {
    std::vector<int> groups;
    std::vector<char> is_hub;
    int group_count = 0;

    static NodeInfo from_graph(const NetworkGraph& graph) {
        return {graph.node_groups, graph.is_hub, graph.group_count};
    }
};

struct EdgeScore {
    int a = 0;
    int b = 0;
    double score = 0.0;
    double coefficient = 0.0;
};

struct EdgeRanking {
    std::vector<EdgeScore> entries;  // descending score, ties broken by |coef|, then node ids
    Eigen::MatrixXd coefficients;    // coefficients(i, j): posterior mean of j in the regression on node i
    std::vector<int> failed_nodes;
};

struct NeighborhoodOptions {
    Symmetrize symmetrize = Symmetrize::max_rule;
    int jobs = 1;
    std::uint64_t seed = 0;  // drives the random grouping permutation only
};

namespace detail {

// Group labels per node for the requested modes.  Original grouping keeps
// hub groups; when non-hubs join the feature universe they form additional
// per-community groups (offset by the hub group count, so hubs and non-hubs
// of one community stay in separate groups).  The random variant permutes
// those labels uniformly across the feature universe, so group sizes are
// preserved but placement is destroyed.
inline std::vector<int> effective_node_labels(const NodeInfo& info, FeatureMode features, GroupingMode mode,
                                              std::uint64_t seed) {
    const int p = static_cast<int>(info.groups.size());
    std::vector<int> labels(static_cast<std::size_t>(p), -1);
    for (int i = 0; i < p; ++i) {
        if (info.is_hub[static_cast<std::size_t>(i)]) labels[static_cast<std::size_t>(i)] = info.groups[static_cast<std::size_t>(i)];
        else if (features == FeatureMode::all_nodes)
            labels[static_cast<std::size_t>(i)] = info.group_count + info.groups[static_cast<std::size_t>(i)];
    }
    if (mode == GroupingMode::random) {
        std::vector<int> universe;
        for (int i = 0; i < p; ++i)
            if (labels[static_cast<std::size_t>(i)] >= 0) universe.push_back(i);
        std::vector<int> pool;
        pool.reserve(universe.size());
        for (int i : universe) pool.push_back(labels[static_cast<std::size_t>(i)]);
        Rng rng(substream_seed(seed, 0));
        rng.shuffle(pool);
        for (std::size_t i = 0; i < universe.size(); ++i) labels[static_cast<std::size_t>(universe[i])] = pool[i];
    }
    return labels;
}

}  // namespace detail

// One sparse regression per node against the chosen feature columns; edge
// scores are the symmetrised inclusion probabilities.  Failed regressions
// are recorded and their direction simply drops out of the scoring.
inline EdgeRanking neighborhood_selection(const Eigen::MatrixXd& x, const NodeInfo& info, FeatureMode features,
                                          GroupingMode grouping_mode, const Hyperparams& hyper,
                                          const NeighborhoodOptions& opts = {}) {
    const int p = static_cast<int>(x.cols());
    if (static_cast<int>(info.groups.size()) != p || static_cast<int>(info.is_hub.size()) != p)
        throw dimension_error("neighborhood_selection: node metadata does not match the data's column count");

    const std::vector<int> labels = detail::effective_node_labels(info, features, grouping_mode, opts.seed);

    std::vector<int> feature_universe;
    for (int i = 0; i < p; ++i)
        if (features == FeatureMode::all_nodes || info.is_hub[static_cast<std::size_t>(i)]) feature_universe.push_back(i);

    Eigen::MatrixXd prob = Eigen::MatrixXd::Constant(p, p, -1.0);  // -1: direction not scored
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(p, p);
    std::vector<char> failed(static_cast<std::size_t>(p), 0);

    const auto run_node = [&](int node) {
        std::vector<int> cols;
        for (int j : feature_universe)
            if (j != node) cols.push_back(j);
        if (cols.empty()) {
            failed[static_cast<std::size_t>(node)] = 1;
            return;
        }
        Eigen::MatrixXd design(x.rows(), cols.size());
        std::vector<int> col_labels;
        col_labels.reserve(cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) {
            design.col(static_cast<int>(c)) = x.col(cols[c]);
            col_labels.push_back(labels[static_cast<std::size_t>(cols[c])]);
        }
        try {
            const Grouping grouping = Grouping::compact(col_labels);
            const FitResult res = fit(RegressionData(std::move(design), x.col(node)), grouping, hyper);
            for (std::size_t c = 0; c < cols.size(); ++c) {
                prob(node, cols[c]) = res.feature_prob[static_cast<int>(c)];
                coef(node, cols[c]) = res.mean[static_cast<int>(c)];
            }
        } catch (const std::exception&) {
            failed[static_cast<std::size_t>(node)] = 1;
        }
    };

    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        for (int node = 0; node < p; ++node) run_node(node);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> workers;
        const int worker_count = std::min(jobs, p);
        workers.reserve(static_cast<std::size_t>(worker_count));
        for (int w = 0; w < worker_count; ++w)
            workers.emplace_back([&]() {
                for (;;) {
                    const int node = next.fetch_add(1);
                    if (node >= p) return;
                    run_node(node);
                }
            });
        for (auto& t : workers) t.join();
    }

    EdgeRanking out;
    out.coefficients = std::move(coef);
    for (int i = 0; i < p; ++i)
        if (failed[static_cast<std::size_t>(i)]) out.failed_nodes.push_back(i);

    for (int a = 0; a < p; ++a) {
        for (int b = a + 1; b < p; ++b) {
            const double s_ab = prob(a, b);  // b as predictor of a
            const double s_ba = prob(b, a);
            if (s_ab < 0.0 && s_ba < 0.0) continue;
            EdgeScore e;
            e.a = a;
            e.b = b;
            if (s_ab < 0.0 || s_ba < 0.0) {
                // Only one direction available; both rules reduce to it.
                e.score = std::max(s_ab, s_ba);
                e.coefficient = s_ab >= 0.0 ? out.coefficients(a, b) : out.coefficients(b, a);
            } else {
                const bool take_ab = opts.symmetrize == Symmetrize::max_rule ? s_ab >= s_ba : s_ab <= s_ba;
                e.score = take_ab ? s_ab : s_ba;
                e.coefficient = take_ab ? out.coefficients(a, b) : out.coefficients(b, a);
            }
            out.entries.push_back(e);
        }
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const EdgeScore& l, const EdgeScore& r) {
        if (l.score != r.score) return l.score > r.score;
        if (std::abs(l.coefficient) != std::abs(r.coefficient)) return std::abs(l.coefficient) > std::abs(r.coefficient);
        if (l.a != r.a) return l.a < r.a;
        return l.b < r.b;
    });
    return out;
}

// Relative squared error of predicting every node from all others:
// ||X - X B'||_F^2 / ||X||_F^2 with B's diagonal zero.
inline double network_prediction_error(const Eigen::MatrixXd& b_hat, const Eigen::MatrixXd& x_test) {
    if (b_hat.rows() != b_hat.cols() || b_hat.cols() != x_test.cols())
        throw dimension_error("network_prediction_error: coefficient matrix does not match the data's columns");
    const double denom = x_test.squaredNorm();
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (x_test - x_test * b_hat.transpose()).squaredNorm() / denom;
}

}  // namespace sgss
