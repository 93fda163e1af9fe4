// Command-line front end: model fitting, benchmark simulation, network
// reconstruction, evaluation and exact-enumeration comparison.  Every
// command is a pure function of its input files, flags and seed; emitted
// files are byte-identical across reruns, and every JSON output embeds the
// full configuration plus a content hash of each input file.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sgss/ep.hpp"
#include "sgss/io.hpp"
#include "sgss/metrics.hpp"
#include "sgss/model.hpp"
#include "sgss/network.hpp"
#include "sgss/oracle.hpp"
#include "sgss/simulate.hpp"

namespace {

using nlohmann::json;

constexpr int schema_version = 1;
constexpr int exit_parse = 2;
constexpr int exit_dimension = 3;

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw sgss::parse_error("cannot create output directory '" + dir + "': " + ec.message());
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

void write_json(const std::string& path, const json& j) {
    sgss::io::write_file(path, j.dump(2) + "\n");
}

json parse_json_file(const std::string& path) {
    json j = json::parse(sgss::io::read_file(path), nullptr, false);
    if (j.is_discarded()) throw sgss::parse_error("'" + path + "': invalid JSON");
    return j;
}

int to_int(long value, const std::string& context) {
    if (value < std::numeric_limits<int>::min() || value > std::numeric_limits<int>::max())
        throw sgss::parse_error(context + ": value " + std::to_string(value) + " out of range");
    return static_cast<int>(value);
}

// ---------------------------------------------------------------------------
// Shared hyperparameter flags

struct HyperFlags {
    sgss::Hyperparams hp;

    explicit HyperFlags(sgss::Hyperparams defaults = {}) : hp(defaults) {}

    void attach(CLI::App* cmd) {
        cmd->add_option("--sigma0", hp.sigma0, "Noise standard deviation assumed by the model")
            ->capture_default_str();
        cmd->add_option("--sigma-slab", hp.sigma_slab, "Slab (active coefficient) standard deviation")
            ->capture_default_str();
        cmd->add_option("--p0", hp.p0, "Prior feature inclusion probability")->capture_default_str();
        cmd->add_option("--pi0", hp.pi0, "Prior group inclusion probability")->capture_default_str();
        cmd->add_option("--alpha", hp.alpha0, "Initial damping weight on updated site parameters")
            ->capture_default_str();
        cmd->add_option("--alpha-decay", hp.alpha_decay, "Per-sweep multiplicative damping decay")
            ->capture_default_str();
        cmd->add_option("--tol", hp.tol, "Convergence threshold on the largest parameter change")
            ->capture_default_str();
        cmd->add_option("--max-iter", hp.max_iter, "Maximum number of sweeps")->capture_default_str();
    }

    json config() const {
        return {{"sigma0", hp.sigma0},       {"sigma_slab", hp.sigma_slab},
                {"p0", hp.p0},               {"pi0", hp.pi0},
                {"alpha", hp.alpha0},        {"alpha_decay", hp.alpha_decay},
                {"tol", hp.tol},             {"max_iter", hp.max_iter}};
    }
};

sgss::RefreshMode parse_refresh(const std::string& name) {
    if (name == "auto") return sgss::RefreshMode::automatic;
    if (name == "direct") return sgss::RefreshMode::direct;
    return sgss::RefreshMode::woodbury;
}

// ---------------------------------------------------------------------------
// CSV ingestion and emission

struct LoadedRegression {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::string> feature_names;
};

LoadedRegression load_regression(const std::string& path, const std::string& response) {
    const sgss::io::CsvTable t = sgss::io::read_csv(path);
    const int resp = t.column(response, "'" + path + "'");
    if (t.rows.empty()) throw sgss::parse_error("'" + path + "': no data rows");

    LoadedRegression out;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (static_cast<int>(i) != resp) out.feature_names.push_back(t.header[i]);
    const int m = static_cast<int>(t.rows.size());
    const int n = static_cast<int>(out.feature_names.size());
    if (n == 0) throw sgss::parse_error("'" + path + "': no feature columns besides the response");

    out.x.resize(m, n);
    out.y.resize(m);
    for (int r = 0; r < m; ++r) {
        const auto& row = t.rows[static_cast<std::size_t>(r)];
        const std::string context = "'" + path + "' row " + std::to_string(r + 2);
        int c = 0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (static_cast<int>(i) == resp) out.y[r] = sgss::io::parse_double(row[i], context);
            else out.x(r, c++) = sgss::io::parse_double(row[i], context);
        }
    }
    return out;
}

// All columns are variables (one per network node); no response column.
Eigen::MatrixXd load_matrix(const std::string& path) {
    const sgss::io::CsvTable t = sgss::io::read_csv(path);
    if (t.rows.empty()) throw sgss::parse_error("'" + path + "': no data rows");
    Eigen::MatrixXd x(t.rows.size(), t.header.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string context = "'" + path + "' row " + std::to_string(r + 2);
        for (std::size_t c = 0; c < t.rows[r].size(); ++c)
            x(static_cast<int>(r), static_cast<int>(c)) = sgss::io::parse_double(t.rows[r][c], context);
    }
    return x;
}

// Grouping file: feature,group with feature names matching the data header.
// Arbitrary integer labels are remapped to 0..G-1 in sorted label order;
// label_by_group reports the original label of each remapped group.
sgss::Grouping load_grouping(const std::string& path, const std::vector<std::string>& feature_names,
                             std::vector<long>* label_by_group) {
    const sgss::io::CsvTable t = sgss::io::read_csv(path);
    const int fc = t.column("feature", "'" + path + "'");
    const int gc = t.column("group", "'" + path + "'");

    std::map<std::string, long> label_of;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string context = "'" + path + "' row " + std::to_string(r + 2);
        const std::string& name = t.rows[r][static_cast<std::size_t>(fc)];
        const long label = sgss::io::parse_long(t.rows[r][static_cast<std::size_t>(gc)], context);
        if (!label_of.emplace(name, label).second)
            throw sgss::parse_error(context + ": duplicate feature '" + name + "'");
    }

    std::vector<int> labels;
    labels.reserve(feature_names.size());
    for (const std::string& name : feature_names) {
        const auto it = label_of.find(name);
        if (it == label_of.end())
            throw sgss::dimension_error("'" + path + "': no group for feature '" + name + "'");
        labels.push_back(to_int(it->second, "'" + path + "' group label"));
    }
    if (label_of.size() != feature_names.size())
        throw sgss::dimension_error("'" + path + "': lists " + std::to_string(label_of.size()) +
                                    " features but the data has " + std::to_string(feature_names.size()));

    std::map<int, int> mapping;
    sgss::Grouping grouping = sgss::Grouping::compact(labels, &mapping);
    if (label_by_group) {
        label_by_group->assign(static_cast<std::size_t>(grouping.n_groups()), 0);
        for (const auto& [original, compact] : mapping) (*label_by_group)[static_cast<std::size_t>(compact)] = original;
    }
    return grouping;
}

std::string regression_csv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& response) {
    std::string out;
    for (int i = 0; i < x.cols(); ++i) out += "x" + std::to_string(i + 1) + ",";
    out += response;
    out += '\n';
    for (int r = 0; r < x.rows(); ++r) {
        for (int i = 0; i < x.cols(); ++i) {
            out += sgss::io::format_double(x(r, i));
            out += ',';
        }
        out += sgss::io::format_double(y[r]);
        out += '\n';
    }
    return out;
}

std::string matrix_csv(const Eigen::MatrixXd& x, const std::string& column_prefix) {
    std::string out;
    for (int i = 0; i < x.cols(); ++i) {
        out += column_prefix + std::to_string(i + 1);
        out += i + 1 < x.cols() ? ',' : '\n';
    }
    for (int r = 0; r < x.rows(); ++r) {
        for (int i = 0; i < x.cols(); ++i) {
            out += sgss::io::format_double(x(r, i));
            out += i + 1 < x.cols() ? ',' : '\n';
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// fit

struct FitCmd {
    std::string data_path;
    std::string grouping_path;
    std::string response = "y";
    std::string out_dir = ".";
    std::string refresh = "auto";
    bool ungrouped = false;
    bool standardize = false;
    int cv_folds = 0;
    std::uint64_t seed = 0;
    HyperFlags hyper;
};

void run_fit(const FitCmd& c) {
    if (!c.ungrouped && c.grouping_path.empty())
        throw sgss::parse_error("fit: provide --grouping FILE or pass --ungrouped");

    LoadedRegression loaded = load_regression(c.data_path, c.response);
    const int n = static_cast<int>(loaded.x.cols());

    std::vector<long> label_by_group;
    sgss::Grouping grouping = sgss::Grouping::injective(n);
    if (!c.ungrouped) {
        grouping = load_grouping(c.grouping_path, loaded.feature_names, &label_by_group);
    } else {
        label_by_group.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) label_by_group[static_cast<std::size_t>(i)] = i;
    }

    // Optional column standardisation (centering always happens inside the
    // solver).  Coefficients are mapped back to the raw scale afterwards.
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(n);
    if (c.standardize && loaded.x.rows() > 1) {
        for (int i = 0; i < n; ++i) {
            const Eigen::VectorXd centered = loaded.x.col(i).array() - loaded.x.col(i).mean();
            const double sd = std::sqrt(centered.squaredNorm() / (loaded.x.rows() - 1.0));
            if (sd > 0.0) {
                scale[i] = sd;
                loaded.x.col(i) /= sd;
            }
        }
    }

    const sgss::RegressionData data(loaded.x, loaded.y);
    const sgss::FitResult res = sgss::fit(data, grouping, c.hyper.hp, parse_refresh(c.refresh));
    const Eigen::VectorXd mean_raw = res.mean.cwiseQuotient(scale);

    json cv;
    if (c.cv_folds > 0) {
        const sgss::CvCutoff cut = sgss::cv_cutoff_1se(data, grouping, c.hyper.hp, c.cv_folds, c.seed);
        cv = {{"folds", c.cv_folds},
              {"folds_used", cut.folds_used},
              {"folds_skipped", cut.folds_skipped},
              {"cutoff", cut.cutoff}};
        std::string curve = "cutoff,mean_error,std_error\n";
        for (const sgss::CvCurvePoint& p : cut.curve) {
            curve += sgss::io::format_double(p.cutoff);
            curve += ',';
            curve += sgss::io::format_double(p.mean_error);
            curve += ',';
            curve += sgss::io::format_double(p.std_error);
            curve += '\n';
        }
        ensure_dir(c.out_dir);
        sgss::io::write_file(join_path(c.out_dir, "cv_curve.csv"), curve);
    }

    json config = c.hyper.config();
    config["data"] = c.data_path;
    config["grouping"] = c.grouping_path;
    config["response"] = c.response;
    config["ungrouped"] = c.ungrouped;
    config["standardize"] = c.standardize;
    config["refresh"] = c.refresh;
    config["cv_folds"] = c.cv_folds;
    config["seed"] = c.seed;

    json inputs;
    inputs[c.data_path] = sgss::io::file_hash_hex(c.data_path);
    if (!c.grouping_path.empty()) inputs[c.grouping_path] = sgss::io::file_hash_hex(c.grouping_path);

    json out = {{"schema_version", schema_version},
                {"command", "fit"},
                {"config", config},
                {"inputs", inputs},
                {"n_features", n},
                {"n_groups", grouping.n_groups()},
                {"feature_names", loaded.feature_names},
                {"group_labels", label_by_group},
                {"group_of", grouping.assignment()},
                {"mean", to_vec(mean_raw)},
                {"feature_prob", to_vec(res.feature_prob)},
                {"group_prob", to_vec(res.group_prob)},
                {"intercept", res.intercept},
                {"iterations", res.iterations},
                {"converged", res.converged},
                {"max_delta", res.max_delta}};
    if (!cv.is_null()) out["cv"] = cv;

    ensure_dir(c.out_dir);
    write_json(join_path(c.out_dir, "fit.json"), out);

    std::string coeffs = "feature,group,mean,probability,group_probability\n";
    for (int i = 0; i < n; ++i) {
        const int g = grouping.group_of(i);
        coeffs += loaded.feature_names[static_cast<std::size_t>(i)];
        coeffs += ',';
        coeffs += std::to_string(label_by_group[static_cast<std::size_t>(g)]);
        coeffs += ',';
        coeffs += sgss::io::format_double(mean_raw[i]);
        coeffs += ',';
        coeffs += sgss::io::format_double(res.feature_prob[i]);
        coeffs += ',';
        coeffs += sgss::io::format_double(res.group_prob[g]);
        coeffs += '\n';
    }
    sgss::io::write_file(join_path(c.out_dir, "coefficients.csv"), coeffs);

    std::cout << "fit: " << (res.converged ? "converged" : "did not converge") << " after " << res.iterations
              << " sweeps (max delta " << res.max_delta << ")\n";
}

// ---------------------------------------------------------------------------
// simulate-signal

struct SimSignalCmd {
    std::string preset = "small";
    int m = -1, n = -1, g = -1, k = -1;
    double sigma0 = -1.0;
    std::string corr = "independent";
    int test_size = 100;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

void run_simulate_signal(const SimSignalCmd& c) {
    sgss::ScenarioSpec spec = c.preset == "medium"  ? sgss::ScenarioSpec::medium()
                              : c.preset == "large" ? sgss::ScenarioSpec::large()
                                                    : sgss::ScenarioSpec::small();
    if (c.m > 0) spec.m = c.m;
    if (c.n > 0) spec.n = c.n;
    if (c.g > 0) spec.g = c.g;
    if (c.k >= 0) spec.k = c.k;
    if (c.sigma0 >= 0.0) spec.sigma0 = c.sigma0;
    spec.corr = c.corr == "pairwise"    ? sgss::CorrStructure::pairwise
                : c.corr == "groupwise" ? sgss::CorrStructure::groupwise
                                        : sgss::CorrStructure::independent;
    spec.validate();

    const sgss::SignalInstance inst = sgss::make_signal_instance(spec, c.seed, c.test_size);

    ensure_dir(c.out_dir);
    sgss::io::write_file(join_path(c.out_dir, "data.csv"), regression_csv(inst.x_train, inst.y_train, "y"));
    sgss::io::write_file(join_path(c.out_dir, "test.csv"), regression_csv(inst.x_test, inst.y_test, "y"));

    std::string grouping = "feature,group\n";
    for (int i = 0; i < spec.n; ++i)
        grouping += "x" + std::to_string(i + 1) + "," + std::to_string(inst.grouping.group_of(i)) + "\n";
    sgss::io::write_file(join_path(c.out_dir, "grouping.csv"), grouping);

    std::vector<std::string> support_names;
    for (int i : inst.support) support_names.push_back("x" + std::to_string(i + 1));

    const json manifest = {{"schema_version", schema_version},
                           {"command", "simulate-signal"},
                           {"config",
                            {{"preset", c.preset},
                             {"m", spec.m},
                             {"n", spec.n},
                             {"g", spec.g},
                             {"k", spec.k},
                             {"sigma0", spec.sigma0},
                             {"corr", c.corr},
                             {"test_size", c.test_size},
                             {"seed", c.seed}}},
                           {"beta", to_vec(inst.beta)},
                           {"support", support_names},
                           {"grouping", inst.grouping.assignment()}};
    write_json(join_path(c.out_dir, "manifest.json"), manifest);

    std::cout << "simulate-signal: wrote " << spec.m << "x" << spec.n << " instance with " << inst.support.size()
              << " active features to " << c.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// simulate-network

struct SimNetworkCmd {
    std::string preset = "small";
    int nodes = -1, groups = -1, hubs = -1;
    double q = -1.0;
    int m = 100;
    int test_size = 100;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

void run_simulate_network(const SimNetworkCmd& c) {
    int p = 100, g = 3, h = 10;
    double q = 0.01;
    if (c.preset == "large") {
        p = 1000;
        g = 20;
        h = 100;
        q = 0.001;
    }
    if (c.nodes > 0) p = c.nodes;
    if (c.groups > 0) g = c.groups;
    if (c.hubs > 0) h = c.hubs;
    if (c.q >= 0.0) q = c.q;

    sgss::Rng rng(c.seed);
    const sgss::NetworkGraph graph = sgss::gen_scale_free_graph(p, g, h, q, rng);
    const sgss::GaussianNetworkData data = sgss::graph_to_gaussian(graph, c.m, c.test_size, rng);

    ensure_dir(c.out_dir);
    sgss::io::write_file(join_path(c.out_dir, "data.csv"), matrix_csv(data.x_train, "n"));
    sgss::io::write_file(join_path(c.out_dir, "test.csv"), matrix_csv(data.x_test, "n"));

    std::string nodes = "node,group,hub\n";
    for (int i = 0; i < p; ++i)
        nodes += std::to_string(i + 1) + "," + std::to_string(graph.node_groups[static_cast<std::size_t>(i)]) +
                 "," + std::to_string(static_cast<int>(graph.is_hub[static_cast<std::size_t>(i)])) + "\n";
    sgss::io::write_file(join_path(c.out_dir, "nodes.csv"), nodes);

    std::string edges = "node_a,node_b\n";
    json edge_list = json::array();
    for (const auto& [a, b] : graph.edges) {
        edges += std::to_string(a + 1) + "," + std::to_string(b + 1) + "\n";
        edge_list.push_back({a + 1, b + 1});
    }
    sgss::io::write_file(join_path(c.out_dir, "edges.csv"), edges);

    std::vector<int> hubs_1based;
    for (int hub : graph.hubs) hubs_1based.push_back(hub + 1);

    const json manifest = {{"schema_version", schema_version},
                           {"command", "simulate-network"},
                           {"config",
                            {{"preset", c.preset},
                             {"nodes", p},
                             {"groups", g},
                             {"hubs", h},
                             {"q", q},
                             {"m", c.m},
                             {"test_size", c.test_size},
                             {"seed", c.seed}}},
                           {"edges", edge_list},
                           {"hub_nodes", hubs_1based},
                           {"node_groups", graph.node_groups}};
    write_json(join_path(c.out_dir, "manifest.json"), manifest);

    std::cout << "simulate-network: wrote " << p << " nodes, " << graph.edges.size() << " edges to " << c.out_dir
              << "\n";
}

// ---------------------------------------------------------------------------
// reconstruct

struct ReconstructCmd {
    std::string data_path;
    std::string nodes_path;
    std::string features = "all";
    std::string grouping = "original";
    std::string symmetrize = "max";
    int jobs = 1;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    HyperFlags hyper{sgss::Hyperparams::network()};
};

sgss::NodeInfo load_nodes(const std::string& path, int p) {
    const sgss::io::CsvTable t = sgss::io::read_csv(path);
    const int node_col = t.column("node", "'" + path + "'");
    const int group_col = t.column("group", "'" + path + "'");
    const int hub_col = t.column("hub", "'" + path + "'");
    if (static_cast<int>(t.rows.size()) != p)
        throw sgss::dimension_error("'" + path + "': lists " + std::to_string(t.rows.size()) +
                                    " nodes but the data has " + std::to_string(p) + " columns");

    std::vector<int> raw_labels(static_cast<std::size_t>(p), 0);
    std::vector<char> is_hub(static_cast<std::size_t>(p), 0);
    std::vector<char> seen(static_cast<std::size_t>(p), 0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string context = "'" + path + "' row " + std::to_string(r + 2);
        const long node = sgss::io::parse_long(t.rows[r][static_cast<std::size_t>(node_col)], context);
        if (node < 1 || node > p) throw sgss::parse_error(context + ": node id out of range");
        const std::size_t idx = static_cast<std::size_t>(node - 1);
        if (seen[idx]) throw sgss::parse_error(context + ": duplicate node id");
        seen[idx] = 1;
        raw_labels[idx] = to_int(sgss::io::parse_long(t.rows[r][static_cast<std::size_t>(group_col)], context),
                                 context + " group");
        const long hub = sgss::io::parse_long(t.rows[r][static_cast<std::size_t>(hub_col)], context);
        if (hub != 0 && hub != 1) throw sgss::parse_error(context + ": hub flag must be 0 or 1");
        is_hub[idx] = static_cast<char>(hub);
    }

    const sgss::Grouping compacted = sgss::Grouping::compact(raw_labels);
    sgss::NodeInfo info;
    info.groups = compacted.assignment();
    info.is_hub = std::move(is_hub);
    info.group_count = compacted.n_groups();
    return info;
}

void run_reconstruct(const ReconstructCmd& c) {
    const Eigen::MatrixXd x = load_matrix(c.data_path);
    const int p = static_cast<int>(x.cols());
    const sgss::NodeInfo info = load_nodes(c.nodes_path, p);

    const sgss::FeatureMode fmode = c.features == "hubs" ? sgss::FeatureMode::hubs_only : sgss::FeatureMode::all_nodes;
    const sgss::GroupingMode gmode = c.grouping == "random" ? sgss::GroupingMode::random : sgss::GroupingMode::original;

    sgss::NeighborhoodOptions opts;
    opts.symmetrize = c.symmetrize == "min" ? sgss::Symmetrize::min_rule : sgss::Symmetrize::max_rule;
    opts.jobs = c.jobs;
    opts.seed = c.seed;

    const sgss::EdgeRanking ranking = sgss::neighborhood_selection(x, info, fmode, gmode, c.hyper.hp, opts);

    ensure_dir(c.out_dir);
    std::string csv = "node_a,node_b,score,coefficient\n";
    for (const sgss::EdgeScore& e : ranking.entries) {
        csv += std::to_string(e.a + 1);
        csv += ',';
        csv += std::to_string(e.b + 1);
        csv += ',';
        csv += sgss::io::format_double(e.score);
        csv += ',';
        csv += sgss::io::format_double(e.coefficient);
        csv += '\n';
    }
    sgss::io::write_file(join_path(c.out_dir, "ranking.csv"), csv);
    sgss::io::write_file(join_path(c.out_dir, "bhat.csv"), matrix_csv(ranking.coefficients, "n"));

    json config = c.hyper.config();
    config["data"] = c.data_path;
    config["nodes"] = c.nodes_path;
    config["features"] = c.features;
    config["grouping"] = c.grouping;
    config["symmetrize"] = c.symmetrize;
    config["jobs"] = c.jobs;
    config["seed"] = c.seed;

    std::vector<int> failed_1based;
    for (int node : ranking.failed_nodes) failed_1based.push_back(node + 1);

    const json out = {{"schema_version", schema_version},
                      {"command", "reconstruct"},
                      {"config", config},
                      {"inputs",
                       {{c.data_path, sgss::io::file_hash_hex(c.data_path)},
                        {c.nodes_path, sgss::io::file_hash_hex(c.nodes_path)}}},
                      {"n_nodes", p},
                      {"scored_pairs", ranking.entries.size()},
                      {"failed_nodes", failed_1based}};
    write_json(join_path(c.out_dir, "reconstruct.json"), out);

    std::cout << "reconstruct: scored " << ranking.entries.size() << " candidate edges over " << p << " nodes";
    if (!ranking.failed_nodes.empty()) std::cout << " (" << ranking.failed_nodes.size() << " regressions failed)";
    std::cout << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalCmd {
    std::string ranking_path;
    std::string gold_path;
    std::string nodes_path;
    std::string fit_path;
    std::string bhat_path;
    std::string test_path;
    std::string response;
    std::string out_dir = ".";
};

// Edge list as canonical (a < b, 0-based) pairs.
std::set<std::pair<int, int>> load_edge_set(const std::string& path, int p) {
    const sgss::io::CsvTable t = sgss::io::read_csv(path);
    const int ac = t.column("node_a", "'" + path + "'");
    const int bc = t.column("node_b", "'" + path + "'");
    std::set<std::pair<int, int>> edges;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string context = "'" + path + "' row " + std::to_string(r + 2);
        const long a = sgss::io::parse_long(t.rows[r][static_cast<std::size_t>(ac)], context);
        const long b = sgss::io::parse_long(t.rows[r][static_cast<std::size_t>(bc)], context);
        if (a < 1 || a > p || b < 1 || b > p) throw sgss::parse_error(context + ": node id out of range");
        if (a == b) throw sgss::parse_error(context + ": self loop");
        edges.insert({static_cast<int>(std::min(a, b)) - 1, static_cast<int>(std::max(a, b)) - 1});
    }
    return edges;
}

void eval_ranking(const EvalCmd& c, json& metrics, json& inputs) {
    const sgss::io::CsvTable nodes = sgss::io::read_csv(c.nodes_path);
    nodes.column("node", "'" + c.nodes_path + "'");
    const int p = static_cast<int>(nodes.rows.size());
    if (p < 2) throw sgss::parse_error("'" + c.nodes_path + "': need at least two nodes");

    const sgss::io::CsvTable t = sgss::io::read_csv(c.ranking_path);
    const int ac = t.column("node_a", "'" + c.ranking_path + "'");
    const int bc = t.column("node_b", "'" + c.ranking_path + "'");
    const int sc = t.column("score", "'" + c.ranking_path + "'");
    std::map<std::pair<int, int>, double> scores;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string context = "'" + c.ranking_path + "' row " + std::to_string(r + 2);
        const long a = sgss::io::parse_long(t.rows[r][static_cast<std::size_t>(ac)], context);
        const long b = sgss::io::parse_long(t.rows[r][static_cast<std::size_t>(bc)], context);
        if (a < 1 || a > p || b < 1 || b > p) throw sgss::parse_error(context + ": node id out of range");
        if (a == b) throw sgss::parse_error(context + ": self loop");
        const std::pair<int, int> key{static_cast<int>(std::min(a, b)) - 1, static_cast<int>(std::max(a, b)) - 1};
        const double s = sgss::io::parse_double(t.rows[r][static_cast<std::size_t>(sc)], context);
        if (!scores.emplace(key, s).second) throw sgss::parse_error(context + ": duplicate edge");
    }

    const std::set<std::pair<int, int>> gold = load_edge_set(c.gold_path, p);

    // Candidate universe: all unordered pairs.  Pairs the ranking never
    // scored count as score zero (one tie block at the bottom).
    const int n_star = p * (p - 1) / 2;
    sgss::RankedPredictions preds;
    preds.scores.resize(n_star);
    preds.labels.resize(static_cast<std::size_t>(n_star));
    int idx = 0;
    for (int a = 0; a < p; ++a) {
        for (int b = a + 1; b < p; ++b) {
            const auto it = scores.find({a, b});
            preds.scores[idx] = it == scores.end() ? 0.0 : it->second;
            preds.labels[static_cast<std::size_t>(idx)] = gold.count({a, b}) ? 1 : 0;
            ++idx;
        }
    }

    const sgss::RocPr r = sgss::roc_pr(preds);
    metrics["auroc"] = r.auroc;
    metrics["aupr"] = r.aupr;
    metrics["positives"] = static_cast<int>(gold.size());
    metrics["candidates"] = n_star;
    metrics["scored_pairs"] = static_cast<int>(scores.size());

    std::string curves = "threshold,fpr,tpr,precision\n";
    for (const sgss::CurvePoint& pt : r.points) {
        curves += sgss::io::format_double(pt.threshold);
        curves += ',';
        curves += sgss::io::format_double(pt.fpr);
        curves += ',';
        curves += sgss::io::format_double(pt.tpr);
        curves += ',';
        curves += sgss::io::format_double(pt.precision);
        curves += '\n';
    }
    ensure_dir(c.out_dir);
    sgss::io::write_file(join_path(c.out_dir, "curves.csv"), curves);

    inputs[c.ranking_path] = sgss::io::file_hash_hex(c.ranking_path);
    inputs[c.gold_path] = sgss::io::file_hash_hex(c.gold_path);
    inputs[c.nodes_path] = sgss::io::file_hash_hex(c.nodes_path);
}

void eval_fit(const EvalCmd& c, json& metrics, json& inputs) {
    const json fj = parse_json_file(c.fit_path);
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> prob;
    std::string response = c.response;
    double cutoff = -1.0;
    try {
        names = fj.at("feature_names").get<std::vector<std::string>>();
        mean = fj.at("mean").get<std::vector<double>>();
        prob = fj.at("feature_prob").get<std::vector<double>>();
        if (response.empty()) response = fj.at("config").at("response").get<std::string>();
        if (fj.contains("cv")) cutoff = fj.at("cv").at("cutoff").get<double>();
    } catch (const json::exception& e) {
        throw sgss::parse_error("'" + c.fit_path + "': " + e.what());
    }
    if (names.size() != mean.size() || names.size() != prob.size())
        throw sgss::parse_error("'" + c.fit_path + "': feature_names, mean and feature_prob lengths differ");

    const sgss::io::CsvTable t = sgss::io::read_csv(c.test_path);
    const int resp = t.column(response, "'" + c.test_path + "'");
    if (t.rows.empty()) throw sgss::parse_error("'" + c.test_path + "': no data rows");
    if (t.header.size() != names.size() + 1)
        throw sgss::dimension_error("'" + c.test_path + "': has " + std::to_string(t.header.size() - 1) +
                                    " feature columns but the fit used " + std::to_string(names.size()));

    // Align test columns with the fitted feature order by name.
    std::vector<int> col_of(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) col_of[i] = t.column(names[i], "'" + c.test_path + "'");

    const int m = static_cast<int>(t.rows.size());
    const int n = static_cast<int>(names.size());
    Eigen::MatrixXd x(m, n);
    Eigen::VectorXd y(m);
    for (int r = 0; r < m; ++r) {
        const std::string context = "'" + c.test_path + "' row " + std::to_string(r + 2);
        y[r] = sgss::io::parse_double(t.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(resp)], context);
        for (int i = 0; i < n; ++i)
            x(r, i) = sgss::io::parse_double(
                t.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(col_of[static_cast<std::size_t>(i)])],
                context);
    }

    const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(mean.data(), n);
    metrics["e"] = sgss::signal_prediction_error(beta, x, y);
    if (cutoff >= 0.0) {
        const Eigen::VectorXd prob_vec = Eigen::Map<const Eigen::VectorXd>(prob.data(), n);
        const Eigen::VectorXd thresholded = sgss::detail::threshold_coefficients(beta, prob_vec, cutoff);
        metrics["e_cutoff"] = sgss::signal_prediction_error(thresholded, x, y);
        metrics["cutoff"] = cutoff;
    }

    inputs[c.fit_path] = sgss::io::file_hash_hex(c.fit_path);
    inputs[c.test_path] = sgss::io::file_hash_hex(c.test_path);
}

void eval_bhat(const EvalCmd& c, json& metrics, json& inputs) {
    const Eigen::MatrixXd b_hat = load_matrix(c.bhat_path);
    const Eigen::MatrixXd x_test = load_matrix(c.test_path);
    if (b_hat.rows() != b_hat.cols())
        throw sgss::dimension_error("'" + c.bhat_path + "': coefficient matrix is not square");
    metrics["e"] = sgss::network_prediction_error(b_hat, x_test);
    inputs[c.bhat_path] = sgss::io::file_hash_hex(c.bhat_path);
    inputs[c.test_path] = sgss::io::file_hash_hex(c.test_path);
}

void run_eval(const EvalCmd& c) {
    const bool mode_rank = !c.ranking_path.empty();
    const bool mode_fit = !c.fit_path.empty();
    const bool mode_bhat = !c.bhat_path.empty();
    if (static_cast<int>(mode_rank) + static_cast<int>(mode_fit) + static_cast<int>(mode_bhat) != 1)
        throw sgss::parse_error(
            "eval: choose one mode: --ranking with --gold and --nodes, --fit with --test, or --bhat with --test");
    if (mode_rank && (c.gold_path.empty() || c.nodes_path.empty()))
        throw sgss::parse_error("eval: --ranking requires --gold and --nodes");
    if ((mode_fit || mode_bhat) && c.test_path.empty())
        throw sgss::parse_error("eval: --fit and --bhat require --test");

    json metrics, inputs;
    if (mode_rank) eval_ranking(c, metrics, inputs);
    else if (mode_fit) eval_fit(c, metrics, inputs);
    else eval_bhat(c, metrics, inputs);

    const json config = {{"ranking", c.ranking_path}, {"gold", c.gold_path},   {"nodes", c.nodes_path},
                         {"fit", c.fit_path},         {"bhat", c.bhat_path},   {"test", c.test_path},
                         {"response", c.response}};
    const json out = {{"schema_version", schema_version},
                      {"command", "eval"},
                      {"config", config},
                      {"inputs", inputs},
                      {"metrics", metrics}};
    ensure_dir(c.out_dir);
    write_json(join_path(c.out_dir, "metrics.json"), out);

    std::cout << "eval:";
    for (const auto& [key, value] : metrics.items()) std::cout << " " << key << "=" << value.dump();
    std::cout << "\n";
}

// ---------------------------------------------------------------------------
// oracle-compare

struct OracleCmd {
    std::string data_path;
    std::string grouping_path;
    std::string response = "y";
    std::string out_dir = ".";
    bool ungrouped = false;
    HyperFlags hyper;
};

void run_oracle_compare(const OracleCmd& c) {
    if (!c.ungrouped && c.grouping_path.empty())
        throw sgss::parse_error("oracle-compare: provide --grouping FILE or pass --ungrouped");

    const LoadedRegression loaded = load_regression(c.data_path, c.response);
    const int n = static_cast<int>(loaded.x.cols());
    if (n > sgss::oracle_max_features)
        throw std::invalid_argument("oracle-compare: exact enumeration is limited to " +
                                    std::to_string(sgss::oracle_max_features) + " features, got " +
                                    std::to_string(n));

    sgss::Grouping grouping = sgss::Grouping::injective(n);
    if (!c.ungrouped) grouping = load_grouping(c.grouping_path, loaded.feature_names, nullptr);

    const sgss::RegressionData data(loaded.x, loaded.y);
    const sgss::FitResult ep = sgss::fit(data, grouping, c.hyper.hp);
    const sgss::OraclePosterior exact = sgss::enumerate_posterior(data, grouping, c.hyper.hp);

    const Eigen::VectorXd prob_dev = (ep.feature_prob - exact.feature_prob).cwiseAbs();
    const Eigen::VectorXd mean_dev = (ep.mean - exact.mean).cwiseAbs();

    json config = c.hyper.config();
    config["data"] = c.data_path;
    config["grouping"] = c.grouping_path;
    config["response"] = c.response;
    config["ungrouped"] = c.ungrouped;

    json inputs;
    inputs[c.data_path] = sgss::io::file_hash_hex(c.data_path);
    if (!c.grouping_path.empty()) inputs[c.grouping_path] = sgss::io::file_hash_hex(c.grouping_path);

    const json out = {{"schema_version", schema_version},
                      {"command", "oracle-compare"},
                      {"config", config},
                      {"inputs", inputs},
                      {"max_abs_prob_deviation", prob_dev.maxCoeff()},
                      {"mean_abs_prob_deviation", prob_dev.mean()},
                      {"max_abs_mean_deviation", mean_dev.maxCoeff()},
                      {"mean_abs_mean_deviation", mean_dev.mean()},
                      {"approx",
                       {{"feature_prob", to_vec(ep.feature_prob)},
                        {"mean", to_vec(ep.mean)},
                        {"group_prob", to_vec(ep.group_prob)},
                        {"iterations", ep.iterations},
                        {"converged", ep.converged}}},
                      {"exact",
                       {{"feature_prob", to_vec(exact.feature_prob)},
                        {"mean", to_vec(exact.mean)},
                        {"group_prob", to_vec(exact.group_prob)},
                        {"log_evidence", exact.log_evidence}}}};
    ensure_dir(c.out_dir);
    write_json(join_path(c.out_dir, "oracle.json"), out);

    std::cout << "oracle-compare: mean |prob deviation| " << prob_dev.mean() << ", max " << prob_dev.maxCoeff()
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-group Bayesian feature selection via expectation propagation"};
    app.require_subcommand(1);

    auto fit_opt = std::make_shared<FitCmd>();
    {
        CLI::App* cmd = app.add_subcommand("fit", "Fit the sparse-group model to a regression CSV");
        cmd->add_option("--data", fit_opt->data_path, "Data CSV (features + response column)")->required();
        cmd->add_option("--grouping", fit_opt->grouping_path, "Grouping CSV (feature,group)");
        cmd->add_flag("--ungrouped", fit_opt->ungrouped, "Single-level model: one group per feature");
        cmd->add_option("--response", fit_opt->response, "Response column name")->capture_default_str();
        cmd->add_flag("--standardize", fit_opt->standardize, "Scale feature columns to unit variance before fitting");
        cmd->add_option("--refresh", fit_opt->refresh, "Posterior refresh route")
            ->check(CLI::IsMember({"auto", "direct", "woodbury"}))
            ->capture_default_str();
        cmd->add_option("--cv-folds", fit_opt->cv_folds,
                        "Cross-validate the probability cutoff with this many folds (0 = off)")
            ->capture_default_str();
        cmd->add_option("--seed", fit_opt->seed, "Seed for the cross-validation fold shuffle")->capture_default_str();
        cmd->add_option("--out", fit_opt->out_dir, "Output directory")->capture_default_str();
        fit_opt->hyper.attach(cmd);
        cmd->callback([fit_opt] { run_fit(*fit_opt); });
    }

    auto sim_sig_opt = std::make_shared<SimSignalCmd>();
    {
        CLI::App* cmd = app.add_subcommand("simulate-signal", "Generate a grouped sparse-regression instance");
        cmd->add_option("--preset", sim_sig_opt->preset, "Scenario preset")
            ->check(CLI::IsMember({"small", "medium", "large"}))
            ->capture_default_str();
        cmd->add_option("--m", sim_sig_opt->m, "Training observations (overrides preset)");
        cmd->add_option("--n", sim_sig_opt->n, "Features (overrides preset)");
        cmd->add_option("--g", sim_sig_opt->g, "Groups (overrides preset)");
        cmd->add_option("--k", sim_sig_opt->k, "Active features (overrides preset)");
        cmd->add_option("--sigma0", sim_sig_opt->sigma0, "True noise standard deviation (overrides preset)");
        cmd->add_option("--corr", sim_sig_opt->corr, "Feature correlation structure")
            ->check(CLI::IsMember({"independent", "pairwise", "groupwise"}))
            ->capture_default_str();
        cmd->add_option("--test-size", sim_sig_opt->test_size, "Held-out observations")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--seed", sim_sig_opt->seed, "Random seed")->capture_default_str();
        cmd->add_option("--out", sim_sig_opt->out_dir, "Output directory")->capture_default_str();
        cmd->callback([sim_sig_opt] { run_simulate_signal(*sim_sig_opt); });
    }

    auto sim_net_opt = std::make_shared<SimNetworkCmd>();
    {
        CLI::App* cmd = app.add_subcommand("simulate-network", "Generate a hub-structured Gaussian network instance");
        cmd->add_option("--preset", sim_net_opt->preset, "Network preset")
            ->check(CLI::IsMember({"small", "large"}))
            ->capture_default_str();
        cmd->add_option("--nodes", sim_net_opt->nodes, "Node count (overrides preset)");
        cmd->add_option("--groups", sim_net_opt->groups, "Group count (overrides preset)");
        cmd->add_option("--hubs", sim_net_opt->hubs, "Hub count (overrides preset)");
        cmd->add_option("--q", sim_net_opt->q, "Shortcut edge probability (overrides preset)");
        cmd->add_option("--m", sim_net_opt->m, "Training observations")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--test-size", sim_net_opt->test_size, "Held-out observations")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--seed", sim_net_opt->seed, "Random seed")->capture_default_str();
        cmd->add_option("--out", sim_net_opt->out_dir, "Output directory")->capture_default_str();
        cmd->callback([sim_net_opt] { run_simulate_network(*sim_net_opt); });
    }

    auto rec_opt = std::make_shared<ReconstructCmd>();
    {
        CLI::App* cmd = app.add_subcommand("reconstruct", "Recover a network by per-node sparse regressions");
        cmd->add_option("--data", rec_opt->data_path, "Observations CSV (one column per node)")->required();
        cmd->add_option("--nodes", rec_opt->nodes_path, "Node metadata CSV (node,group,hub)")->required();
        cmd->add_option("--features", rec_opt->features, "Feature universe per regression")
            ->check(CLI::IsMember({"hubs", "all"}))
            ->capture_default_str();
        cmd->add_option("--grouping", rec_opt->grouping, "Group structure handed to the model")
            ->check(CLI::IsMember({"original", "random"}))
            ->capture_default_str();
        cmd->add_option("--symmetrize", rec_opt->symmetrize, "Combination rule for the two directed scores")
            ->check(CLI::IsMember({"max", "min"}))
            ->capture_default_str();
        cmd->add_option("--jobs", rec_opt->jobs, "Concurrent per-node fits")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--seed", rec_opt->seed, "Seed for the random grouping permutation")->capture_default_str();
        cmd->add_option("--out", rec_opt->out_dir, "Output directory")->capture_default_str();
        rec_opt->hyper.attach(cmd);
        cmd->callback([rec_opt] { run_reconstruct(*rec_opt); });
    }

    auto eval_opt = std::make_shared<EvalCmd>();
    {
        CLI::App* cmd = app.add_subcommand("eval", "Score rankings against a gold standard or fits on held-out data");
        cmd->add_option("--ranking", eval_opt->ranking_path, "Edge ranking CSV (node_a,node_b,score,coefficient)");
        cmd->add_option("--gold", eval_opt->gold_path, "Gold standard edge list CSV (node_a,node_b)");
        cmd->add_option("--nodes", eval_opt->nodes_path, "Node metadata CSV defining the candidate universe");
        cmd->add_option("--fit", eval_opt->fit_path, "fit.json produced by the fit command");
        cmd->add_option("--bhat", eval_opt->bhat_path, "Coefficient matrix CSV produced by reconstruct");
        cmd->add_option("--test", eval_opt->test_path, "Held-out data CSV");
        cmd->add_option("--response", eval_opt->response, "Response column in --test (default: from fit.json)");
        cmd->add_option("--out", eval_opt->out_dir, "Output directory")->capture_default_str();
        cmd->callback([eval_opt] { run_eval(*eval_opt); });
    }

    auto oracle_opt = std::make_shared<OracleCmd>();
    {
        CLI::App* cmd = app.add_subcommand("oracle-compare",
                                           "Compare the approximate posterior against exact enumeration");
        cmd->add_option("--data", oracle_opt->data_path, "Data CSV (features + response column)")->required();
        cmd->add_option("--grouping", oracle_opt->grouping_path, "Grouping CSV (feature,group)");
        cmd->add_flag("--ungrouped", oracle_opt->ungrouped, "Single-level model: one group per feature");
        cmd->add_option("--response", oracle_opt->response, "Response column name")->capture_default_str();
        cmd->add_option("--out", oracle_opt->out_dir, "Output directory")->capture_default_str();
        oracle_opt->hyper.attach(cmd);
        cmd->callback([oracle_opt] { run_oracle_compare(*oracle_opt); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_parse;
    } catch (const sgss::dimension_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_dimension;
    } catch (const sgss::parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_parse;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_parse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
