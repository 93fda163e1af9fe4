#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "sgss/simulate.hpp"

using namespace sgss;

TEST_CASE("scenario presets carry the documented shapes") {
    const ScenarioSpec small = ScenarioSpec::small();
    CHECK(small.m == 30);
    CHECK(small.n == 30);
    CHECK(small.g == 5);
    CHECK(small.k == 5);
    CHECK(small.sigma0 == 1.0);

    const ScenarioSpec medium = ScenarioSpec::medium();
    CHECK(medium.m == 30);
    CHECK(medium.n == 100);
    CHECK(medium.g == 20);
    CHECK(medium.k == 10);

    const ScenarioSpec large = ScenarioSpec::large();
    CHECK(large.m == 100);
    CHECK(large.n == 1000);
    CHECK(large.g == 100);
    CHECK(large.k == 10);
}

TEST_CASE("instances are reproducible from the seed") {
    const ScenarioSpec spec = ScenarioSpec::small();
    const SignalInstance a = make_signal_instance(spec, 1234);
    const SignalInstance b = make_signal_instance(spec, 1234);
    CHECK(a.x_train == b.x_train);
    CHECK(a.y_train == b.y_train);
    CHECK(a.x_test == b.x_test);
    CHECK(a.beta == b.beta);
    CHECK(a.support == b.support);
    CHECK(a.grouping.assignment() == b.grouping.assignment());

    const SignalInstance c = make_signal_instance(spec, 1235);
    CHECK(a.y_train != c.y_train);
}

TEST_CASE("planted support has the documented structure") {
    const ScenarioSpec spec = ScenarioSpec::medium();
    for (std::uint64_t seed : {7u, 8u, 9u, 10u}) {
        const SignalInstance inst = make_signal_instance(spec, seed);

        // The support lists exactly the k nonzero coefficients in ascending
        // order, all inside [-5, 5].
        std::vector<int> nonzero;
        for (int i = 0; i < spec.n; ++i) {
            if (inst.beta[i] != 0.0) {
                nonzero.push_back(i);
                CHECK(std::abs(inst.beta[i]) <= 5.0);
            }
        }
        CHECK(inst.support == nonzero);
        CHECK(static_cast<int>(nonzero.size()) == spec.k);

        // Active features are drawn from min(3, G) chosen groups; a chosen
        // group may end up without a pick, so "at most" is the guarantee.
        std::set<int> active_groups;
        for (int i : inst.support) active_groups.insert(inst.grouping.group_of(i));
        CHECK(static_cast<int>(active_groups.size()) <= std::min(3, spec.g));
        CHECK(active_groups.size() >= 1);
    }
}

TEST_CASE("train and test splits have the right shapes") {
    const ScenarioSpec spec = ScenarioSpec::small();
    const SignalInstance inst = make_signal_instance(spec, 99);
    CHECK(inst.x_train.rows() == spec.m);
    CHECK(inst.x_train.cols() == spec.n);
    CHECK(inst.x_test.rows() == 100);  // default test split size
    CHECK(inst.x_test.cols() == spec.n);
    CHECK(inst.y_train.size() == spec.m);
    CHECK(inst.y_test.size() == 100);

    const SignalInstance wide = make_signal_instance(spec, 99, 17);
    CHECK(wide.x_test.rows() == 17);
    CHECK(wide.y_test.size() == 17);
    // The test split size does not perturb the training draw.
    CHECK(wide.x_train == inst.x_train);
    CHECK(wide.y_train == inst.y_train);
}

TEST_CASE("response obeys the linear model at the planted noise level") {
    ScenarioSpec spec = ScenarioSpec::small();
    spec.sigma0 = 0.5;
    // Accumulate residual variance over replicates; it should concentrate
    // near sigma0^2.
    double ss = 0.0;
    int count = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const SignalInstance inst = make_signal_instance(spec, seed);
        const Eigen::VectorXd resid = inst.y_train - inst.x_train * inst.beta;
        ss += resid.squaredNorm();
        count += spec.m;
    }
    const double var = ss / count;
    CHECK(var == Catch::Approx(0.25).epsilon(0.15));
}

TEST_CASE("pairwise correlation structure concentrates near 0.5") {
    ScenarioSpec spec;
    spec.m = 4000;
    spec.n = 6;
    spec.g = 2;
    spec.k = 2;
    spec.corr = CorrStructure::pairwise;
    Rng rng(5);
    const auto [x, grouping] = gen_design(spec, rng);
    // Empirical correlation of every pair should be near 0.5.
    for (int a = 0; a < spec.n; ++a) {
        for (int b = a + 1; b < spec.n; ++b) {
            const Eigen::VectorXd ca = x.col(a).array() - x.col(a).mean();
            const Eigen::VectorXd cb = x.col(b).array() - x.col(b).mean();
            const double corr = ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
            CHECK(corr == Catch::Approx(0.5).margin(0.06));
        }
    }
}

TEST_CASE("groupwise correlation is confined to blocks") {
    ScenarioSpec spec;
    spec.m = 4000;
    spec.n = 8;
    spec.g = 2;
    spec.k = 2;
    spec.corr = CorrStructure::groupwise;
    Rng rng(11);
    const Grouping grouping = sample_grouping(spec, rng);
    const Eigen::MatrixXd x = sample_design_rows(spec, grouping, spec.m, rng);
    for (int a = 0; a < spec.n; ++a) {
        for (int b = a + 1; b < spec.n; ++b) {
            const Eigen::VectorXd ca = x.col(a).array() - x.col(a).mean();
            const Eigen::VectorXd cb = x.col(b).array() - x.col(b).mean();
            const double corr = ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
            const double target = grouping.group_of(a) == grouping.group_of(b) ? 0.5 : 0.0;
            CHECK(corr == Catch::Approx(target).margin(0.06));
        }
    }
}

TEST_CASE("independent design columns are uncorrelated") {
    ScenarioSpec spec;
    spec.m = 4000;
    spec.n = 5;
    spec.g = 2;
    spec.k = 2;
    spec.corr = CorrStructure::independent;
    Rng rng(21);
    const auto [x, grouping] = gen_design(spec, rng);
    for (int a = 0; a < spec.n; ++a) {
        for (int b = a + 1; b < spec.n; ++b) {
            const Eigen::VectorXd ca = x.col(a).array() - x.col(a).mean();
            const Eigen::VectorXd cb = x.col(b).array() - x.col(b).mean();
            const double corr = ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
            CHECK(corr == Catch::Approx(0.0).margin(0.06));
        }
    }
}

TEST_CASE("grouping covers every group for the presets") {
    // The generator assigns features uniformly; with n >= g each preset is
    // overwhelmingly likely to touch every group, but correctness only
    // requires ids to be in range.
    const ScenarioSpec spec = ScenarioSpec::medium();
    Rng rng(3);
    const Grouping grouping = sample_grouping(spec, rng);
    CHECK(grouping.n_features() == spec.n);
    CHECK(grouping.n_groups() == spec.g);
    for (int i = 0; i < spec.n; ++i) {
        CHECK(grouping.group_of(i) >= 0);
        CHECK(grouping.group_of(i) < spec.g);
    }
}

TEST_CASE("prediction error identities") {
    const ScenarioSpec spec = ScenarioSpec::small();
    const SignalInstance inst = make_signal_instance(spec, 55);

    // The zero estimate scores exactly 1.
    CHECK(signal_prediction_error(Eigen::VectorXd::Zero(spec.n), inst.x_test, inst.y_test) == 1.0);

    // The planted coefficients score well below 1 (noise only).
    const double e_true = signal_prediction_error(inst.beta, inst.x_test, inst.y_test);
    CHECK(e_true < 0.2);
    CHECK(e_true > 0.0);

    // Garbage coefficients score worse than the truth.
    Eigen::VectorXd bad = inst.beta;
    bad.array() += 3.0;
    CHECK(signal_prediction_error(bad, inst.x_test, inst.y_test) > e_true);
}

TEST_CASE("infeasible support requests are rejected") {
    // With one feature per group, the three largest groups jointly hold
    // three features, so k = 5 cannot be planted.
    ScenarioSpec spec;
    spec.m = 10;
    spec.n = 6;
    spec.g = 6;
    spec.k = 5;
    Rng rng(1);
    CHECK_THROWS_AS(gen_coefficients(spec, Grouping::injective(6), rng), std::invalid_argument);
}

TEST_CASE("scenario validation rejects nonsense") {
    ScenarioSpec spec = ScenarioSpec::small();
    spec.m = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = ScenarioSpec::small();
    spec.k = spec.n + 1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = ScenarioSpec::small();
    spec.sigma0 = -1.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
