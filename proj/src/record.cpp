#include "airshield/record.hpp"

#include <algorithm>
#include <stdexcept>

namespace airshield {

ColumnVector to_columns(const ChannelRecord& r) noexcept {
    return {r.x,       r.y,         r.distance, r.pathloss, r.doa_phi, r.doa_theta,
            r.dod_phi, r.dod_theta, r.phase,    r.power,    r.toa,     static_cast<double>(r.los)};
}

std::vector<double> to_features(const ChannelRecord& r) {
    const ColumnVector c = to_columns(r);
    std::vector<double> out;
    out.reserve(kFeatureCount);
    for (std::size_t i = 0; i < kColumnCount; ++i) {
        if (i != kPathlossColumn) out.push_back(c[i]);
    }
    return out;
}

ColumnVector join_columns(std::span<const double> features, double pathloss) {
    if (features.size() != kFeatureCount) {
        throw std::invalid_argument("expected 11 features, got " + std::to_string(features.size()));
    }
    ColumnVector c{};
    std::copy_n(features.begin(), kPathlossColumn, c.begin());
    c[kPathlossColumn] = pathloss;
    std::copy(features.begin() + kPathlossColumn, features.end(), c.begin() + kPathlossColumn + 1);
    return c;
}

}  // namespace airshield
