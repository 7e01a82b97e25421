#include "airshield/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace airshield::signal {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::size_t axis_points(double lo, double hi, double spacing) {
    // Tolerate accumulated rounding in (hi - lo) / spacing.
    return static_cast<std::size_t>(std::floor((hi - lo) / spacing + 1e-9)) + 1;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("scene config: " + what);
}

void require_finite(double v, const char* name) {
    require(std::isfinite(v), std::string(name) + " must be finite");
}

}  // namespace

std::size_t UserGrid::columns() const { return axis_points(x_min, x_max, spacing); }
std::size_t UserGrid::rows() const { return axis_points(y_min, y_max, spacing); }

void SceneConfig::validate() const {
    require_finite(bs_position.x, "bs_position.x");
    require_finite(bs_position.y, "bs_position.y");
    require_finite(bs_position.z, "bs_position.z");
    require_finite(user_height, "user_height");
    require_finite(carrier_frequency, "carrier_frequency");
    require_finite(pathloss_exponent_los, "pathloss_exponent_los");
    require_finite(pathloss_exponent_nlos, "pathloss_exponent_nlos");
    require_finite(shadowing_sigma_db, "shadowing_sigma_db");
    require_finite(nlos_probability, "nlos_probability");
    require_finite(nlos_cutoff_distance, "nlos_cutoff_distance");
    require_finite(nlos_excess_delay_max, "nlos_excess_delay_max");
    require_finite(blockage_probability, "blockage_probability");
    require_finite(nlos_angle_spread_deg, "nlos_angle_spread_deg");
    require_finite(tx_power_dbm, "tx_power_dbm");
    require_finite(reference_distance, "reference_distance");
    require_finite(pathloss_ceiling_db, "pathloss_ceiling_db");

    require(!user_grids.empty(), "at least one user grid is required");
    for (const UserGrid& g : user_grids) {
        require_finite(g.x_min, "grid x_min");
        require_finite(g.x_max, "grid x_max");
        require_finite(g.y_min, "grid y_min");
        require_finite(g.y_max, "grid y_max");
        require_finite(g.spacing, "grid spacing");
        require(g.spacing > 0.0, "grid spacing must be positive");
        require(g.x_max > g.x_min, "grid x_max must exceed x_min");
        require(g.y_max > g.y_min, "grid y_max must exceed y_min");
    }
    require(carrier_frequency > 0.0, "carrier_frequency must be positive");
    require(pathloss_exponent_los >= 1.0 && pathloss_exponent_nlos >= 1.0,
            "pathloss exponents must be >= 1");
    require(shadowing_sigma_db >= 0.0, "shadowing_sigma_db must be >= 0");
    require(nlos_probability >= 0.0 && nlos_probability <= 1.0,
            "nlos_probability must lie in [0, 1]");
    require(nlos_cutoff_distance > 0.0, "nlos_cutoff_distance must be positive");
    require(nlos_excess_delay_max > 0.0, "nlos_excess_delay_max must be positive");
    require(blockage_probability >= 0.0 && blockage_probability <= 1.0,
            "blockage_probability must lie in [0, 1]");
    require(nlos_angle_spread_deg >= 0.0, "nlos_angle_spread_deg must be >= 0");
    require(reference_distance > 0.0, "reference_distance must be positive");
}

std::size_t SceneConfig::point_count() const {
    std::size_t n = 0;
    for (const UserGrid& g : user_grids) n += g.columns() * g.rows();
    return n;
}

double wrap_azimuth(double degrees) {
    double w = std::fmod(degrees + 180.0, 360.0);
    if (w < 0.0) w += 360.0;
    w -= 180.0;
    return w >= 180.0 ? -180.0 : w;
}

double reference_pathloss(const SceneConfig& config) {
    return 20.0 * std::log10(4.0 * std::numbers::pi * config.reference_distance *
                             config.carrier_frequency / kSpeedOfLight);
}

double compute_pathloss(double distance, LineOfSight los, const SceneConfig& config,
                        double shadowing_db) {
    if (!(distance > 0.0)) throw std::invalid_argument("pathloss: distance must be positive");
    if (los == LineOfSight::Blocked) return config.pathloss_ceiling_db;
    const double n = los == LineOfSight::Clear ? config.pathloss_exponent_los
                                               : config.pathloss_exponent_nlos;
    return reference_pathloss(config) +
           10.0 * n * std::log10(distance / config.reference_distance) + shadowing_db;
}

Geometry compute_geometry(const Vec3& bs, const Vec3& user) {
    const double dx = user.x - bs.x;
    const double dy = user.y - bs.y;
    const double dz = user.z - bs.z;
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (!(d > 0.0)) throw std::invalid_argument("geometry: coincident positions");

    Geometry g;
    g.distance = d;
    g.dod_phi = wrap_azimuth(std::atan2(dy, dx) * kRadToDeg);
    g.dod_theta = std::acos(std::clamp(dz / d, -1.0, 1.0)) * kRadToDeg;
    // Antipodal ray, derived from the departure angles so the relation is exact.
    g.doa_phi = wrap_azimuth(g.dod_phi + 180.0);
    g.doa_theta = 180.0 - g.dod_theta;
    return g;
}

Arrival compute_arrival(double distance, LineOfSight los, double pathloss,
                        const SceneConfig& config, Rng& rng) {
    if (!(distance > 0.0)) throw std::invalid_argument("arrival: distance must be positive");
    const double excess_draw = 1.0 - rng.uniform();  // (0, 1]

    Arrival a;
    const double direct = distance / kSpeedOfLight;
    if (los == LineOfSight::Blocked) {
        a.toa = 10.0 * direct;
        return a;
    }
    a.toa = los == LineOfSight::Obstructed ? direct + excess_draw * config.nlos_excess_delay_max
                                           : direct;
    double phase = std::fmod(360.0 * config.carrier_frequency * a.toa, 360.0);
    if (phase < 0.0) phase += 360.0;
    a.phase = phase >= 360.0 ? 0.0 : phase;
    a.power = std::pow(10.0, (config.tx_power_dbm - pathloss) / 10.0) / 1000.0;
    return a;
}

namespace {

ChannelRecord make_record(const SceneConfig& config, double ux, double uy, std::size_t index) {
    Rng rng(config.rng_seed, index);
    // Fixed draw order per record.
    const double u_state = rng.uniform();
    const double u_block = rng.uniform();
    const double shadow = rng.normal() * config.shadowing_sigma_db;
    const double spread = config.nlos_angle_spread_deg;
    const double off_doa_phi = rng.uniform(-spread, spread);
    const double off_dod_phi = rng.uniform(-spread, spread);
    const double off_doa_theta = rng.uniform(-spread / 2.0, spread / 2.0);
    const double off_dod_theta = rng.uniform(-spread / 2.0, spread / 2.0);

    const Vec3 user{ux, uy, config.user_height};
    Geometry geo = compute_geometry(config.bs_position, user);

    const double p_nlos = config.nlos_model == NlosModel::Fixed
                              ? config.nlos_probability
                              : std::min(1.0, geo.distance / config.nlos_cutoff_distance);
    LineOfSight los = LineOfSight::Clear;
    if (u_state < p_nlos) {
        los = u_block < config.blockage_probability ? LineOfSight::Blocked
                                                    : LineOfSight::Obstructed;
    }

    if (los == LineOfSight::Obstructed) {
        // Dominant path is a reflection; its angles scatter around the direct ray.
        geo.doa_phi = wrap_azimuth(geo.doa_phi + off_doa_phi);
        geo.dod_phi = wrap_azimuth(geo.dod_phi + off_dod_phi);
        geo.doa_theta = std::clamp(geo.doa_theta + off_doa_theta, 0.0, 180.0);
        geo.dod_theta = std::clamp(geo.dod_theta + off_dod_theta, 0.0, 180.0);
    }

    const double pathloss = compute_pathloss(geo.distance, los, config, shadow);
    const Arrival arr = compute_arrival(geo.distance, los, pathloss, config, rng);

    ChannelRecord r;
    r.x = ux;
    r.y = uy;
    r.distance = geo.distance;
    r.pathloss = pathloss;
    r.doa_phi = geo.doa_phi;
    r.doa_theta = geo.doa_theta;
    r.dod_phi = geo.dod_phi;
    r.dod_theta = geo.dod_theta;
    r.phase = arr.phase;
    r.power = arr.power;
    r.toa = arr.toa;
    r.los = los;
    return r;
}

}  // namespace

std::vector<ChannelRecord> generate_scene(const SceneConfig& config) {
    config.validate();
    const std::size_t total = config.point_count();
    if (total == 0) throw std::invalid_argument("scene config: zero grid points");

    std::vector<ChannelRecord> records;
    records.reserve(total);
    std::size_t index = 0;
    for (const UserGrid& g : config.user_grids) {
        const std::size_t nx = g.columns();
        const std::size_t ny = g.rows();
        for (std::size_t j = 0; j < ny; ++j) {
            const double uy = g.y_min + static_cast<double>(j) * g.spacing;
            for (std::size_t i = 0; i < nx; ++i) {
                const double ux = g.x_min + static_cast<double>(i) * g.spacing;
                records.push_back(make_record(config, ux, uy, index++));
            }
        }
    }
    return records;
}

}  // namespace airshield::signal
