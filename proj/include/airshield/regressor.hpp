#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "airshield/record.hpp"

namespace airshield::regression {

enum class Family { Linear, Mlp };
enum class LinearSolver { LeastSquares, GradientDescent };

std::string_view to_string(Family f) noexcept;
Family parse_family(std::string_view name);

/// Per-feature standardization z = (x - mean) / stddev.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;

    static NormStats fit(const std::vector<std::vector<double>>& rows);
    std::vector<double> standardize(std::span<const double> x) const;
    std::vector<double> destandardize(std::span<const double> z) const;
    std::size_t dimension() const noexcept { return mean.size(); }
};

struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> x;
    std::vector<double> y;

    std::size_t size() const noexcept { return y.size(); }
    std::size_t dimension() const noexcept { return feature_names.size(); }

    /// Shape and finiteness; throws std::invalid_argument.
    void validate() const;
    /// validate() plus at least two rows with distinct targets.
    void validate_for_fit() const;

    /// Pathloss target, remaining 11 columns as features.
    static Dataset from_records(std::span<const ChannelRecord> records);
};

struct Hyper {
    Family family = Family::Linear;
    LinearSolver solver = LinearSolver::LeastSquares;  // linear family only
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    std::size_t hidden_width = 16;  // mlp only
    std::uint64_t seed = 7;
};

/// Parameters plus the standardization they were fitted under.
///
/// Linear theta layout: [w_0 .. w_{d-1}, b], prediction w.z + b in target units.
/// MLP theta layout: [W1 (h x d, row-major), b1 (h), w2 (h), b2]; prediction is
/// target_mean + target_scale * (w2 . tanh(W1 z + b1) + b2).
struct RegressionModel {
    Family family = Family::Linear;
    std::vector<std::string> feature_order;
    NormStats norm;
    std::vector<double> theta;
    std::size_t hidden_width = 0;
    double target_mean = 0.0;
    double target_scale = 1.0;

    std::size_t dimension() const noexcept { return feature_order.size(); }
    /// Structural consistency; throws std::invalid_argument.
    void validate() const;
};

/// Optional per-epoch training record.
struct FitTrace {
    std::vector<double> epoch_mse;
};

RegressionModel fit_regressor(const Dataset& data, const Hyper& hyper, FitTrace* trace = nullptr);

double predict(const RegressionModel& model, std::span<const double> x);
double loss(const RegressionModel& model, std::span<const double> x, double y);

/// d loss / d x in the original feature units.
std::vector<double> grad_input(const RegressionModel& model, std::span<const double> x, double y);
/// d loss / d z where z is the standardized input.
std::vector<double> grad_standardized(const RegressionModel& model, std::span<const double> x,
                                      double y);

struct RegressionScores {
    double mse = 0.0;
    double r_squared = 0.0;
};

RegressionScores evaluate_regression(const RegressionModel& model, const Dataset& data);
/// Same metrics from precomputed predictions. Throws when targets are constant.
RegressionScores score_predictions(std::span<const double> predictions, std::span<const double> targets);

/// Self-describing JSON document; doubles round-trip exactly.
std::string serialize_model(const RegressionModel& model);
RegressionModel parse_model(std::string_view text);

}  // namespace airshield::regression
