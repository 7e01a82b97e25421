#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

#include <json.hpp>

#include "airshield/adversary.hpp"
#include "airshield/detector.hpp"
#include "airshield/emulator.hpp"
#include "airshield/llm_gateway.hpp"
#include "airshield/regressor.hpp"

// JSON <-> stage configuration. Unknown keys are rejected so that a typo never
// silently falls back to a default. Absent keys keep their defaults; an absent
// "seed" takes `default_seed`.
namespace airshield::config {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view context);

signal::SceneConfig scene_from_json(const Json& j, std::uint64_t default_seed);
regression::Hyper regressor_from_json(const Json& j, std::uint64_t default_seed);
adversary::AttackConfig attack_from_json(const Json& j, std::uint64_t default_seed);
detection::DetectorHyper detector_from_json(const Json& j, std::uint64_t default_seed);
/// api_key is never read from JSON; callers take it from the environment.
llm::GatewayConfig gateway_from_json(const Json& j, std::uint64_t default_seed);

OrderedJson to_json(const signal::SceneConfig& c);
OrderedJson to_json(const regression::Hyper& h);
OrderedJson to_json(const adversary::AttackConfig& c);
OrderedJson to_json(const detection::DetectorHyper& h);
/// Without the api key.
OrderedJson to_json(const llm::GatewayConfig& c);

/// Parses a JSON document, turning syntax errors into std::invalid_argument.
Json parse_document(std::string_view text, std::string_view what);

}  // namespace airshield::config
