#pragma once

#include <cstdint>
#include <vector>

#include "airshield/record.hpp"
#include "airshield/rng.hpp"

namespace airshield::signal {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// Rectangular user cluster; points are x_min + i*spacing up to x_max inclusive.
struct UserGrid {
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;
    double spacing = 1.0;

    std::size_t columns() const;
    std::size_t rows() const;
};

enum class NlosModel { Fixed, DistanceDependent };

struct SceneConfig {
    Vec3 bs_position{0.0, 0.0, 15.0};
    double user_height = 2.0;
    std::vector<UserGrid> user_grids{{-420.0, -24.0, -200.0, 196.0, 4.0},
                                     {24.0, 420.0, -200.0, 196.0, 4.0}};
    double carrier_frequency = 28e9;  // Hz
    double pathloss_exponent_los = 2.0;
    double pathloss_exponent_nlos = 3.5;
    double shadowing_sigma_db = 4.0;
    NlosModel nlos_model = NlosModel::DistanceDependent;
    double nlos_probability = 0.5;        // NlosModel::Fixed
    double nlos_cutoff_distance = 400.0;  // NlosModel::DistanceDependent, p = min(1, d / cutoff)
    double nlos_excess_delay_max = 200e-9;  // s
    double blockage_probability = 0.05;     // share of obstructed users with no path at all
    double nlos_angle_spread_deg = 20.0;
    double tx_power_dbm = 0.0;
    double reference_distance = 1.0;  // m
    double pathloss_ceiling_db = 250.0;
    std::uint64_t rng_seed = 1;

    /// Throws std::invalid_argument on the first violated invariant.
    void validate() const;
    std::size_t point_count() const;
};

struct Geometry {
    double doa_phi = 0.0;
    double doa_theta = 0.0;
    double dod_phi = 0.0;
    double dod_theta = 0.0;
    double distance = 0.0;
};

struct Arrival {
    double toa = 0.0;
    double phase = 0.0;
    double power = 0.0;
};

/// Wraps an angle in degrees into [-180, 180).
double wrap_azimuth(double degrees);

/// Free-space intercept 20*log10(4*pi*d0*f/c) at the reference distance.
double reference_pathloss(const SceneConfig& config);

/// Log-distance pathloss with the exponent picked by `los`. Blocked users get
/// the configured ceiling.
double compute_pathloss(double distance, LineOfSight los, const SceneConfig& config,
                        double shadowing_db);

/// Direct-ray angles. Departure is the BS->user direction, arrival is the
/// direction the ray comes from as seen by the user (user->BS).
/// Azimuth from +x counterclockwise in [-180, 180), zenith from +z in [0, 180].
Geometry compute_geometry(const Vec3& bs, const Vec3& user);

/// Obstructed users receive a uniform excess delay in (0, nlos_excess_delay_max].
/// Blocked users carry the sentinel toa = 10*d/c, zero phase and zero power.
Arrival compute_arrival(double distance, LineOfSight los, double pathloss,
                        const SceneConfig& config, Rng& rng);

/// One record per grid point, grids in order, row-major (y outer, x inner).
/// Record i draws only from the stream (rng_seed, i).
std::vector<ChannelRecord> generate_scene(const SceneConfig& config);

}  // namespace airshield::signal
