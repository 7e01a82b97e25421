#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace airshield {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

enum class LineOfSight : int { Blocked = -1, Obstructed = 0, Clear = 1 };

/// One emulated user's dominant-path observation.
struct ChannelRecord {
    double x = 0.0;          // m
    double y = 0.0;          // m
    double distance = 0.0;   // m
    double pathloss = 0.0;   // dB
    double doa_phi = 0.0;    // deg, [-180, 180)
    double doa_theta = 0.0;  // deg, [0, 180]
    double dod_phi = 0.0;    // deg, [-180, 180)
    double dod_theta = 0.0;  // deg, [0, 180]
    double phase = 0.0;      // deg, [0, 360)
    double power = 0.0;      // W
    double toa = 0.0;        // s
    LineOfSight los = LineOfSight::Clear;

    bool operator==(const ChannelRecord&) const = default;
};

inline constexpr std::size_t kColumnCount = 12;
inline constexpr std::size_t kFeatureCount = 11;
inline constexpr std::size_t kPathlossColumn = 3;

inline constexpr std::array<std::string_view, kColumnCount> kColumnNames = {
    "x", "y", "distance", "pathloss", "doa_phi", "doa_theta",
    "dod_phi", "dod_theta", "phase", "power", "toa", "los"};

/// Regressor inputs: every column except the pathloss target, in column order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "x", "y", "distance", "doa_phi", "doa_theta", "dod_phi",
    "dod_theta", "phase", "power", "toa", "los"};

using ColumnVector = std::array<double, kColumnCount>;

ColumnVector to_columns(const ChannelRecord& r) noexcept;
std::vector<double> to_features(const ChannelRecord& r);

/// Reassembles the 12-column view from 11 features and a pathloss target.
ColumnVector join_columns(std::span<const double> features, double pathloss);

}  // namespace airshield
