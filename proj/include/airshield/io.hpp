#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "airshield/adversary.hpp"
#include "airshield/attribution.hpp"
#include "airshield/record.hpp"

namespace airshield::io {

/// Header of the records file: x,y,distance,pathloss,doa_phi,doa_theta,dod_phi,dod_theta,phase,power,toa,los
std::string records_header();

/// Values written with 9 significant digits.
std::string records_to_csv(std::span<const ChannelRecord> records);
std::vector<ChannelRecord> records_from_csv(std::string_view text);

/// Record columns followed by label and applied_epsilon. Rows are read back
/// with source_index equal to their row position.
std::string labeled_to_csv(std::span<const adversary::LabeledSample> samples);
std::vector<adversary::LabeledSample> labeled_from_csv(std::string_view text);

/// sample,base_value,prediction,<feature...>
std::string attributions_to_csv(std::span<const attribution::Attribution> attributions,
                                std::span<const std::size_t> sample_ids);
/// rank,feature,mean_abs_shapley
std::string importance_to_csv(const attribution::GlobalImportance& g);
/// feature,value,shapley (one row per explained sample and feature)
std::string importance_points_to_csv(const attribution::GlobalImportance& g);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace airshield::io
