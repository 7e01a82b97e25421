#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "airshield/regressor.hpp"

namespace airshield::attribution {

/// Shapley decomposition of one prediction. base_value is the mean prediction
/// over the background set, so base_value + sum(per_feature) == prediction.
struct Attribution {
    std::vector<double> per_feature;
    double base_value = 0.0;
    double prediction = 0.0;
    std::vector<std::string> feature_order;
};

using PredictFn = std::function<double(std::span<const double>)>;

/// Closed form for the linear family under mean imputation:
/// phi_i = w_i * (z_i - mean_background(z_i)).
Attribution exact_shapley_linear(const regression::RegressionModel& model,
                                 std::span<const double> x,
                                 const regression::Dataset& background);

/// Permutation-sampling estimate. Features outside a coalition take their
/// background mean. Permutation p draws only from the stream (seed, p). The
/// gap between the sampled total and prediction - base_value is spread
/// uniformly over the features.
Attribution sampling_shapley(const PredictFn& predict_fn, std::span<const double> x,
                             const regression::Dataset& background, std::size_t n_permutations,
                             std::uint64_t seed);

struct GlobalImportance {
    std::vector<std::string> feature_order;
    std::vector<double> mean_abs;     // per feature
    std::vector<std::size_t> ranking; // feature indices, most important first
    // points[i] holds (feature value, shapley value) pairs for feature i.
    std::vector<std::vector<std::pair<double, double>>> points;
};

/// samples[k] is the feature vector attributions[k] explains.
GlobalImportance global_importance(std::span<const Attribution> attributions,
                                   std::span<const std::vector<double>> samples);

/// Seeded subsample without replacement (whole set when it is smaller).
regression::Dataset subsample_background(const regression::Dataset& data, std::size_t rows,
                                         std::uint64_t seed);

}  // namespace airshield::attribution
