#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "airshield/attribution.hpp"
#include "airshield/emulator.hpp"
#include "airshield/rng.hpp"
#include "oracles.hpp"

using namespace airshield;
using namespace airshield::attribution;
using regression::Dataset;

namespace {

Dataset toy(std::size_t n, std::size_t d, std::uint64_t seed) {
    Dataset ds;
    for (std::size_t i = 0; i < d; ++i) ds.feature_names.push_back("f" + std::to_string(i));
    Rng rng(seed);
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> x(d);
        double y = 0.5;
        for (std::size_t i = 0; i < d; ++i) {
            x[i] = rng.uniform(-3, 3);
            y += (static_cast<double>(i) - 1.0) * x[i];
        }
        ds.x.push_back(x);
        ds.y.push_back(y + 0.1 * rng.normal());
    }
    return ds;
}

std::vector<double> means(const Dataset& d) {
    std::vector<double> m(d.dimension(), 0.0);
    for (const auto& row : d.x)
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += row[i];
    for (double& v : m) v /= static_cast<double>(d.size());
    return m;
}

double total(const Attribution& a) {
    return a.base_value + std::accumulate(a.per_feature.begin(), a.per_feature.end(), 0.0);
}

}  // namespace

TEST_CASE("attribution: exact path efficiency") {
    const Dataset d = toy(300, 5, 1);
    const auto m = regression::fit_regressor(d, {});
    const Dataset bg = subsample_background(d, 128, 2);
    for (std::size_t r = 0; r < 100; ++r) {
        const Attribution a = exact_shapley_linear(m, d.x[r], bg);
        CHECK(std::abs(total(a) - regression::predict(m, d.x[r])) < 1e-9);
        CHECK(a.prediction == regression::predict(m, d.x[r]));
        CHECK(a.feature_order == m.feature_order);
    }
}

TEST_CASE("attribution: base value is the mean background prediction") {
    const Dataset d = toy(200, 3, 3);
    const auto m = regression::fit_regressor(d, {});
    double mean_pred = 0.0;
    for (const auto& row : d.x) mean_pred += regression::predict(m, row);
    mean_pred /= static_cast<double>(d.size());
    CHECK(exact_shapley_linear(m, d.x[0], d).base_value == doctest::Approx(mean_pred).epsilon(1e-12));
}

TEST_CASE("attribution: background mean input gives zero attributions") {
    const Dataset d = toy(200, 4, 4);
    const auto m = regression::fit_regressor(d, {});
    const Attribution a = exact_shapley_linear(m, means(d), d);
    for (double phi : a.per_feature) CHECK(std::abs(phi) < 1e-12);
}

TEST_CASE("attribution: dummy and symmetry axioms on the exact path") {
    regression::RegressionModel m;
    m.family = regression::Family::Linear;
    m.feature_order = {"a", "b", "c"};
    m.norm.mean = {0.0, 0.0, 0.0};
    m.norm.stddev = {1.0, 1.0, 1.0};
    m.theta = {1.0, 0.0, 1.0, 0.25};  // w = (1, 0, 1), b
    Dataset bg;
    bg.feature_names = m.feature_order;
    bg.x = {{-1.0, 4.0, -1.0}, {1.0, -2.0, 1.0}};
    bg.y = {0.0, 1.0};
    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
        const double v = rng.uniform(-5, 5);
        const std::vector<double> x{v, rng.uniform(-5, 5), v};
        const Attribution a = exact_shapley_linear(m, x, bg);
        CHECK(a.per_feature[1] == 0.0);
        CHECK(a.per_feature[0] == a.per_feature[2]);
    }
}

TEST_CASE("attribution: exact path equals brute-force coalition enumeration") {
    const Dataset d = toy(150, 3, 6);
    const auto m = regression::fit_regressor(d, {});
    const auto mu = means(d);
    const auto f = [&](const std::vector<double>& v) { return regression::predict(m, v); };
    for (std::size_t r = 0; r < 50; ++r) {
        const auto ref = oracle::brute_force_shapley(f, d.x[r], mu);
        const Attribution a = exact_shapley_linear(m, d.x[r], d);
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(a.per_feature[i] - ref[i]) < 1e-9);
    }
}

TEST_CASE("attribution: exact path rejects non-linear models and bad input") {
    const Dataset d = toy(100, 3, 7);
    regression::Hyper h;
    h.family = regression::Family::Mlp;
    h.epochs = 2;
    const auto mlp = regression::fit_regressor(d, h);
    CHECK_THROWS_AS(exact_shapley_linear(mlp, d.x[0], d), std::invalid_argument);
    const auto lin = regression::fit_regressor(d, {});
    Dataset empty;
    empty.feature_names = d.feature_names;
    CHECK_THROWS_AS(exact_shapley_linear(lin, d.x[0], empty), std::invalid_argument);
    const PredictFn fn = [](std::span<const double>) { return 0.0; };
    CHECK_THROWS_AS(sampling_shapley(fn, d.x[0], empty, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(sampling_shapley(fn, d.x[0], d, 0, 1), std::invalid_argument);
}

TEST_CASE("attribution: sampling estimator on a linear model matches the exact path") {
    const Dataset d = toy(300, 6, 8);
    const auto m = regression::fit_regressor(d, {});
    const Dataset bg = subsample_background(d, 64, 9);
    const PredictFn fn = [&](std::span<const double> x) { return regression::predict(m, x); };
    for (std::size_t r = 0; r < 5; ++r) {
        const Attribution exact = exact_shapley_linear(m, d.x[r], bg);
        const Attribution est = sampling_shapley(fn, d.x[r], bg, 1000, 10);
        for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(est.per_feature[i] - exact.per_feature[i]) < 0.05);
        CHECK(std::abs(total(est) - est.prediction) < 1e-9);
    }
}

TEST_CASE("attribution: sampling is seeded and converges on a nonlinear function") {
    const PredictFn fn = [](std::span<const double> v) {
        return v[0] * v[1] + std::sin(v[2]) * v[3] + v[0] * v[0] * v[3];
    };
    const auto oracle_fn = [&](const std::vector<double>& v) { return fn(v); };
    Dataset bg;
    bg.feature_names = {"a", "b", "c", "d"};
    bg.x = {{0.1, -0.2, 0.3, 0.4}};  // single row: base equals the empty coalition value
    bg.y = {0.0};
    const std::vector<double> x{1.5, -1.0, 2.0, 0.7};
    const auto ref = oracle::brute_force_shapley(oracle_fn, x, bg.x[0]);

    CHECK(sampling_shapley(fn, x, bg, 50, 3).per_feature == sampling_shapley(fn, x, bg, 50, 3).per_feature);
    CHECK(sampling_shapley(fn, x, bg, 50, 3).per_feature != sampling_shapley(fn, x, bg, 50, 4).per_feature);

    const auto err = [&](std::size_t n) {
        double worst_mean = 0.0;
        for (std::uint64_t s = 0; s < 10; ++s) {
            const auto a = sampling_shapley(fn, x, bg, n, s);
            double e = 0.0;
            for (std::size_t i = 0; i < 4; ++i) e += std::abs(a.per_feature[i] - ref[i]);
            worst_mean += e / 10.0;
        }
        return worst_mean;
    };
    const double e10 = err(10), e1000 = err(1000);
    CHECK(e1000 < e10);
    CHECK(e1000 < 0.05);
}

TEST_CASE("attribution: constant predictor gives zero attributions") {
    const Dataset d = toy(50, 4, 11);
    const PredictFn fn = [](std::span<const double>) { return 3.25; };
    const Attribution a = sampling_shapley(fn, d.x[0], d, 100, 1);
    for (double phi : a.per_feature) CHECK(phi == 0.0);
    CHECK(a.base_value == 3.25);
}

TEST_CASE("attribution: global importance ranking") {
    Attribution a;
    a.feature_order = {"a", "b", "c"};
    a.per_feature = {0.5, -2.0, 1.0};
    const std::vector<std::vector<double>> xs{{1.0, 2.0, 3.0}};
    const auto g = global_importance(std::vector<Attribution>{a}, xs);
    CHECK(g.ranking == std::vector<std::size_t>{1, 2, 0});
    CHECK(g.mean_abs == std::vector<double>{0.5, 2.0, 1.0});
    REQUIRE(g.points[1].size() == 1);
    CHECK(g.points[1][0] == std::pair<double, double>{2.0, -2.0});

    const auto g3 = global_importance(std::vector<Attribution>{a, a, a},
                                      std::vector<std::vector<double>>{xs[0], xs[0], xs[0]});
    CHECK(g3.ranking == g.ranking);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g3.mean_abs[i] == doctest::Approx(g.mean_abs[i]));
    for (double v : g3.mean_abs) CHECK(v >= 0.0);
    CHECK_THROWS_AS(global_importance(std::vector<Attribution>{}, std::vector<std::vector<double>>{}),
                    std::invalid_argument);
}

TEST_CASE("attribution: background subsample is seeded and without replacement") {
    const Dataset d = toy(100, 2, 12);
    const Dataset a = subsample_background(d, 30, 1);
    CHECK(a.size() == 30);
    CHECK(subsample_background(d, 30, 1).x == a.x);
    CHECK(subsample_background(d, 30, 2).x != a.x);
    CHECK(subsample_background(d, 500, 1).size() == 100);
}

TEST_CASE("attribution: arrival time and distance outrank phase on an emulated scene") {
    signal::SceneConfig c;
    c.user_grids = {{-420.0, -24.0, -200.0, 196.0, 12.0}, {24.0, 420.0, -200.0, 196.0, 12.0}};
    const Dataset d = Dataset::from_records(signal::generate_scene(c));
    const auto m = regression::fit_regressor(d, {});
    const Dataset bg = subsample_background(d, 512, 1);
    std::vector<Attribution> atts;
    std::vector<std::vector<double>> xs;
    for (std::size_t r = 0; r < d.size(); r += 10) {
        atts.push_back(exact_shapley_linear(m, d.x[r], bg));
        xs.push_back(d.x[r]);
    }
    const auto g = global_importance(atts, xs);
    const auto rank_of = [&](std::string_view name) {
        for (std::size_t k = 0; k < g.ranking.size(); ++k)
            if (g.feature_order[g.ranking[k]] == name) return k;
        return g.ranking.size();
    };
    CHECK(rank_of("toa") < rank_of("phase"));
    CHECK(rank_of("distance") < rank_of("phase"));
}
