#include "airshield/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "airshield/rng.hpp"

namespace airshield::attribution {
namespace {

std::vector<double> column_means(const regression::Dataset& data) {
    std::vector<double> m(data.dimension(), 0.0);
    for (const auto& row : data.x)
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += row[i];
    for (double& v : m) v /= static_cast<double>(data.size());
    return m;
}

void check_background(const regression::Dataset& background, std::size_t dim) {
    if (background.size() == 0) throw std::invalid_argument("attribution: empty background");
    if (background.dimension() != dim) {
        throw std::invalid_argument("attribution: background dimension mismatch");
    }
}

}  // namespace

Attribution exact_shapley_linear(const regression::RegressionModel& model,
                                 std::span<const double> x,
                                 const regression::Dataset& background) {
    if (model.family != regression::Family::Linear) {
        throw std::invalid_argument("exact Shapley path requires a linear model");
    }
    const std::size_t d = model.dimension();
    if (x.size() != d) throw std::invalid_argument("attribution: wrong feature count");
    check_background(background, d);

    std::vector<double> zbar(d, 0.0);
    for (const auto& row : background.x) {
        const auto z = model.norm.standardize(row);
        for (std::size_t i = 0; i < d; ++i) zbar[i] += z[i];
    }
    for (double& v : zbar) v /= static_cast<double>(background.size());

    const auto z = model.norm.standardize(x);
    Attribution a;
    a.feature_order = model.feature_order;
    a.per_feature.resize(d);
    a.base_value = model.theta[d];
    for (std::size_t i = 0; i < d; ++i) {
        a.per_feature[i] = model.theta[i] * (z[i] - zbar[i]);
        a.base_value += model.theta[i] * zbar[i];
    }
    a.prediction = regression::predict(model, x);
    return a;
}

Attribution sampling_shapley(const PredictFn& predict_fn, std::span<const double> x,
                             const regression::Dataset& background, std::size_t n_permutations,
                             std::uint64_t seed) {
    if (n_permutations == 0) throw std::invalid_argument("attribution: n_permutations must be >= 1");
    const std::size_t d = x.size();
    check_background(background, d);

    const std::vector<double> mu = column_means(background);
    const double v_empty = predict_fn(mu);

    std::vector<double> phi(d, 0.0);
    std::vector<std::size_t> order(d);
    std::vector<double> current(d);
    for (std::size_t p = 0; p < n_permutations; ++p) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(seed, p);
        rng.shuffle(std::span(order));
        current = mu;
        double v_prev = v_empty;
        for (std::size_t i : order) {
            current[i] = x[i];
            const double v = predict_fn(current);
            phi[i] += v - v_prev;
            v_prev = v;
        }
    }
    for (double& v : phi) v /= static_cast<double>(n_permutations);

    Attribution a;
    a.feature_order = background.feature_names;
    a.prediction = predict_fn(x);
    double base = 0.0;
    for (const auto& row : background.x) base += predict_fn(row);
    a.base_value = base / static_cast<double>(background.size());

    const double gap = a.prediction - a.base_value - std::accumulate(phi.begin(), phi.end(), 0.0);
    for (double& v : phi) v += gap / static_cast<double>(d);
    a.per_feature = std::move(phi);
    return a;
}

GlobalImportance global_importance(std::span<const Attribution> attributions,
                                   std::span<const std::vector<double>> samples) {
    if (attributions.empty()) throw std::invalid_argument("global importance: no attributions");
    if (samples.size() != attributions.size()) {
        throw std::invalid_argument("global importance: one sample per attribution is required");
    }
    const std::size_t d = attributions.front().per_feature.size();
    GlobalImportance g;
    g.feature_order = attributions.front().feature_order;
    g.mean_abs.assign(d, 0.0);
    g.points.resize(d);
    for (std::size_t k = 0; k < attributions.size(); ++k) {
        const Attribution& a = attributions[k];
        if (a.per_feature.size() != d || samples[k].size() != d) {
            throw std::invalid_argument("global importance: inconsistent dimensions");
        }
        for (std::size_t i = 0; i < d; ++i) {
            g.mean_abs[i] += std::abs(a.per_feature[i]);
            g.points[i].emplace_back(samples[k][i], a.per_feature[i]);
        }
    }
    for (double& m : g.mean_abs) m /= static_cast<double>(attributions.size());
    g.ranking.resize(d);
    std::iota(g.ranking.begin(), g.ranking.end(), 0);
    std::stable_sort(g.ranking.begin(), g.ranking.end(),
                     [&](std::size_t a, std::size_t b) { return g.mean_abs[a] > g.mean_abs[b]; });
    return g;
}

regression::Dataset subsample_background(const regression::Dataset& data, std::size_t rows,
                                         std::uint64_t seed) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span(idx));
    idx.resize(std::min(rows, idx.size()));
    std::sort(idx.begin(), idx.end());

    regression::Dataset out;
    out.feature_names = data.feature_names;
    for (std::size_t i : idx) {
        out.x.push_back(data.x[i]);
        out.y.push_back(data.y[i]);
    }
    return out;
}

}  // namespace airshield::attribution
