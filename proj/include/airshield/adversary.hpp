#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "airshield/regressor.hpp"

namespace airshield::adversary {

enum class AttackSpace { Standardized, Raw };

std::string_view to_string(AttackSpace s) noexcept;
AttackSpace parse_attack_space(std::string_view name);

struct AttackConfig {
    double epsilon = 0.1;
    double fract = 0.99;
    AttackSpace space = AttackSpace::Standardized;
    bool clamp_to_physical = false;
    std::uint64_t seed = 11;

    void validate() const;
};

inline constexpr int kBenign = 0;
inline constexpr int kMalicious = 1;

struct LabeledSample {
    std::vector<double> x;  // possibly perturbed features
    double y = 0.0;         // untouched pathloss target
    int label = kBenign;
    std::size_t source_index = 0;
    double applied_epsilon = 0.0;

    bool operator==(const LabeledSample&) const = default;
};

/// Per-coordinate step size: stddev_i in standardized space, 1 in raw space.
std::vector<double> perturbation_scale(const regression::RegressionModel& model, AttackSpace space);

/// x' = x + epsilon * scale_i * sign(dJ/dx_i), with sign(0) = 0.
std::vector<double> fgsm_perturb(const regression::RegressionModel& model, std::span<const double> x,
                                 double y, double epsilon, AttackSpace space);

/// Projects an 11-feature vector back into physically meaningful ranges.
void clamp_to_physical(std::span<double> features);

/// Poisons round(fract * N) rows picked uniformly without replacement, then
/// returns every row in a seeded shuffled order. With epsilon = 0 nothing is
/// poisoned and all rows are labeled benign.
std::vector<LabeledSample> poison_dataset(const regression::Dataset& data,
                                          const regression::RegressionModel& model,
                                          const AttackConfig& cfg);

/// Indices that poison_dataset selects for the given size and config.
std::vector<std::size_t> select_poisoned(std::size_t n, const AttackConfig& cfg);

struct DegradationReport {
    double mse_clean = 0.0;
    double mse_poisoned = 0.0;
    double delta_mse_pct = 0.0;
    double r2_clean = 0.0;
    double r2_poisoned = 0.0;
    double delta_r2_pct = 0.0;
    std::size_t poisoned_rows = 0;
    std::size_t total_rows = 0;
};

/// Fixed model evaluated on the clean rows and on the poisoned rows.
DegradationReport degradation_report(const regression::RegressionModel& model,
                                     const regression::Dataset& clean,
                                     std::span<const LabeledSample> poisoned);

std::string serialize_report(const DegradationReport& report, const AttackConfig& cfg);

}  // namespace airshield::adversary
