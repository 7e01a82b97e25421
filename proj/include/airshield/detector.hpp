#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "airshield/adversary.hpp"
#include "airshield/regressor.hpp"

namespace airshield::detection {

enum class DetectorKind { Logistic, Mlp };

/// Input map in front of the classifier. `Squares` appends z_i^2 to the
/// standardized inputs so that a displacement in either direction moves the
/// score the same way; `Quadratic` further appends every product z_i z_j, i < j.
enum class Expansion { None, Squares, Quadratic };

std::size_t expanded_size(Expansion e, std::size_t d) noexcept;

std::string_view to_string(DetectorKind k) noexcept;
DetectorKind parse_detector_kind(std::string_view name);
std::string_view to_string(Expansion e) noexcept;
Expansion parse_expansion(std::string_view name);

struct DetectorHyper {
    DetectorKind kind = DetectorKind::Logistic;
    Expansion expansion = Expansion::Quadratic;
    double learning_rate = 0.1;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    std::size_t hidden_width = 16;
    double decision_threshold = 0.5;
    std::uint64_t seed = 13;
};

/// theta layout, logistic: [w (m), b]; mlp: [W1 (h x m), b1 (h), w2 (h), b2]
/// where m is the expanded feature count.
struct DetectorModel {
    DetectorKind kind = DetectorKind::Logistic;
    Expansion expansion = Expansion::Quadratic;
    std::vector<std::string> feature_names;
    regression::NormStats input_norm;     // over raw inputs
    regression::NormStats expanded_norm;  // over the expanded map
    std::vector<double> theta;
    std::size_t hidden_width = 0;
    double decision_threshold = 0.5;

    std::size_t dimension() const noexcept { return feature_names.size(); }
    std::size_t expanded_dimension() const noexcept { return expanded_norm.dimension(); }
    void validate() const;
};

/// Standardized, expanded, re-standardized features the classifier consumes.
std::vector<double> detector_features(const DetectorModel& model, std::span<const double> input);

struct DetectorTrace {
    std::vector<double> epoch_loss;  // mean cross-entropy after each epoch
};

DetectorModel train_detector(const std::vector<std::vector<double>>& inputs,
                             std::span<const int> labels, std::vector<std::string> feature_names,
                             const DetectorHyper& hyper, DetectorTrace* trace = nullptr);

/// Detector input of a labeled sample: the 12 record columns.
std::vector<double> sample_columns(const adversary::LabeledSample& s);

DetectorModel train_detector(std::span<const adversary::LabeledSample> train,
                             const DetectorHyper& hyper, DetectorTrace* trace = nullptr);

struct Classification {
    int label = 0;
    double probability = 0.0;
};

/// label = 1 iff probability >= decision_threshold.
Classification classify(const DetectorModel& model, std::span<const double> input);
double mean_cross_entropy(const DetectorModel& model, const std::vector<std::vector<double>>& inputs,
                          std::span<const int> labels);

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;

    bool operator==(const ClassScores&) const = default;
};

/// Confusion counts are for the malicious class (label 1). precision/recall are
/// macro averages over both classes and f1 is their harmonic mean. Zero
/// denominators yield 0.
struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t support = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::array<ClassScores, 2> per_class{};  // [benign, malicious]

    bool operator==(const Metrics&) const = default;
};

Metrics compute_metrics(std::span<const int> predicted, std::span<const int> truth);

/// Structured report using the column names Precision / Recall / F1-score.
std::string metrics_report(const Metrics& m);

std::string serialize_detector(const DetectorModel& model);
DetectorModel parse_detector(std::string_view text);

}  // namespace airshield::detection
