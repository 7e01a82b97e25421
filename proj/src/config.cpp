#include "airshield/config.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace airshield::config {
namespace {

template <class T>
void read(const Json& j, const char* key, T& out) {
    if (const auto it = j.find(key); it != j.end()) {
        try {
            out = it->get<T>();
        } catch (const Json::exception& e) {
            throw std::invalid_argument(std::string("config key '") + key + "': " + e.what());
        }
    }
}

std::uint64_t read_seed(const Json& j, std::uint64_t fallback) {
    std::uint64_t seed = fallback;
    read(j, "seed", seed);
    return seed;
}

void require_object(const Json& j, std::string_view context) {
    if (!j.is_object()) throw std::invalid_argument(std::string(context) + ": expected an object");
}

}  // namespace

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view context) {
    require_object(j, context);
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw std::invalid_argument(std::string(context) + ": unknown key '" + key + "'");
        }
    }
}

Json parse_document(std::string_view text, std::string_view what) {
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw std::invalid_argument(std::string(what) + ": " + e.what());
    }
}

signal::SceneConfig scene_from_json(const Json& j, std::uint64_t default_seed) {
    check_keys(j,
               {"bs_position", "user_height", "user_grids", "carrier_frequency", "pathloss_exponent_los",
                "pathloss_exponent_nlos", "shadowing_sigma_db", "nlos_model", "nlos_probability",
                "nlos_cutoff_distance", "nlos_excess_delay_max", "blockage_probability",
                "nlos_angle_spread_deg", "tx_power_dbm", "reference_distance", "pathloss_ceiling_db", "seed"},
               "scene");
    signal::SceneConfig c;
    if (const auto it = j.find("bs_position"); it != j.end()) {
        const auto v = it->get<std::vector<double>>();
        if (v.size() != 3) throw std::invalid_argument("scene: bs_position needs 3 values");
        c.bs_position = {v[0], v[1], v[2]};
    }
    if (const auto it = j.find("user_grids"); it != j.end()) {
        if (!it->is_array()) throw std::invalid_argument("scene: user_grids must be an array");
        c.user_grids.clear();
        for (const auto& g : *it) {
            check_keys(g, {"x_min", "x_max", "y_min", "y_max", "spacing"}, "scene.user_grids");
            signal::UserGrid grid;
            read(g, "x_min", grid.x_min);
            read(g, "x_max", grid.x_max);
            read(g, "y_min", grid.y_min);
            read(g, "y_max", grid.y_max);
            read(g, "spacing", grid.spacing);
            c.user_grids.push_back(grid);
        }
    }
    read(j, "user_height", c.user_height);
    read(j, "carrier_frequency", c.carrier_frequency);
    read(j, "pathloss_exponent_los", c.pathloss_exponent_los);
    read(j, "pathloss_exponent_nlos", c.pathloss_exponent_nlos);
    read(j, "shadowing_sigma_db", c.shadowing_sigma_db);
    std::string model = c.nlos_model == signal::NlosModel::Fixed ? "fixed" : "distance";
    read(j, "nlos_model", model);
    if (model == "fixed") c.nlos_model = signal::NlosModel::Fixed;
    else if (model == "distance") c.nlos_model = signal::NlosModel::DistanceDependent;
    else throw std::invalid_argument("scene: nlos_model must be 'fixed' or 'distance'");
    read(j, "nlos_probability", c.nlos_probability);
    read(j, "nlos_cutoff_distance", c.nlos_cutoff_distance);
    read(j, "nlos_excess_delay_max", c.nlos_excess_delay_max);
    read(j, "blockage_probability", c.blockage_probability);
    read(j, "nlos_angle_spread_deg", c.nlos_angle_spread_deg);
    read(j, "tx_power_dbm", c.tx_power_dbm);
    read(j, "reference_distance", c.reference_distance);
    read(j, "pathloss_ceiling_db", c.pathloss_ceiling_db);
    c.rng_seed = read_seed(j, default_seed);
    c.validate();
    return c;
}

regression::Hyper regressor_from_json(const Json& j, std::uint64_t default_seed) {
    check_keys(j, {"family", "solver", "learning_rate", "epochs", "batch_size", "hidden_width", "seed"},
               "regressor");
    regression::Hyper h;
    std::string family(regression::to_string(h.family));
    read(j, "family", family);
    h.family = regression::parse_family(family);
    std::string solver = "least_squares";
    read(j, "solver", solver);
    if (solver == "least_squares") h.solver = regression::LinearSolver::LeastSquares;
    else if (solver == "gradient_descent") h.solver = regression::LinearSolver::GradientDescent;
    else throw std::invalid_argument("regressor: solver must be 'least_squares' or 'gradient_descent'");
    read(j, "learning_rate", h.learning_rate);
    read(j, "epochs", h.epochs);
    read(j, "batch_size", h.batch_size);
    read(j, "hidden_width", h.hidden_width);
    h.seed = read_seed(j, default_seed);
    return h;
}

adversary::AttackConfig attack_from_json(const Json& j, std::uint64_t default_seed) {
    check_keys(j, {"epsilon", "fract", "space", "clamp_to_physical", "seed"}, "attack");
    adversary::AttackConfig c;
    read(j, "epsilon", c.epsilon);
    read(j, "fract", c.fract);
    std::string space(adversary::to_string(c.space));
    read(j, "space", space);
    c.space = adversary::parse_attack_space(space);
    read(j, "clamp_to_physical", c.clamp_to_physical);
    c.seed = read_seed(j, default_seed);
    c.validate();
    return c;
}

detection::DetectorHyper detector_from_json(const Json& j, std::uint64_t default_seed) {
    check_keys(j, {"kind", "expansion", "learning_rate", "epochs", "batch_size", "hidden_width",
                   "decision_threshold", "seed"},
               "detector");
    detection::DetectorHyper h;
    std::string kind(detection::to_string(h.kind));
    read(j, "kind", kind);
    h.kind = detection::parse_detector_kind(kind);
    std::string expansion(detection::to_string(h.expansion));
    read(j, "expansion", expansion);
    h.expansion = detection::parse_expansion(expansion);
    read(j, "learning_rate", h.learning_rate);
    read(j, "epochs", h.epochs);
    read(j, "batch_size", h.batch_size);
    read(j, "hidden_width", h.hidden_width);
    read(j, "decision_threshold", h.decision_threshold);
    h.seed = read_seed(j, default_seed);
    if (!(h.decision_threshold > 0.0 && h.decision_threshold < 1.0)) {
        throw std::invalid_argument("detector: decision_threshold must lie in (0, 1)");
    }
    return h;
}

llm::GatewayConfig gateway_from_json(const Json& j, std::uint64_t default_seed) {
    check_keys(j, {"backend", "endpoint_url", "model_name", "max_output_tokens", "temperature",
                   "request_timeout", "max_parallel_requests", "retry", "abort_threshold", "run_id", "seed"},
               "gateway");
    llm::GatewayConfig c;
    std::string backend(llm::to_string(c.backend));
    read(j, "backend", backend);
    c.backend = llm::parse_backend_kind(backend);
    read(j, "endpoint_url", c.endpoint_url);
    read(j, "model_name", c.model_name);
    read(j, "max_output_tokens", c.max_output_tokens);
    read(j, "temperature", c.temperature);
    read(j, "request_timeout", c.request_timeout);
    read(j, "max_parallel_requests", c.max_parallel_requests);
    if (const auto it = j.find("retry"); it != j.end()) {
        check_keys(*it, {"max_retries", "backoff_base_seconds"}, "gateway.retry");
        read(*it, "max_retries", c.retry.max_retries);
        read(*it, "backoff_base_seconds", c.retry.backoff_base_seconds);
    }
    read(j, "abort_threshold", c.abort_threshold);
    read(j, "run_id", c.run_id);
    c.mock_seed = read_seed(j, default_seed);
    c.validate();
    return c;
}

OrderedJson to_json(const signal::SceneConfig& c) {
    OrderedJson j;
    j["bs_position"] = {c.bs_position.x, c.bs_position.y, c.bs_position.z};
    j["user_height"] = c.user_height;
    j["user_grids"] = OrderedJson::array();
    for (const auto& g : c.user_grids) {
        j["user_grids"].push_back(
            {{"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min}, {"y_max", g.y_max}, {"spacing", g.spacing}});
    }
    j["carrier_frequency"] = c.carrier_frequency;
    j["pathloss_exponent_los"] = c.pathloss_exponent_los;
    j["pathloss_exponent_nlos"] = c.pathloss_exponent_nlos;
    j["shadowing_sigma_db"] = c.shadowing_sigma_db;
    j["nlos_model"] = c.nlos_model == signal::NlosModel::Fixed ? "fixed" : "distance";
    j["nlos_probability"] = c.nlos_probability;
    j["nlos_cutoff_distance"] = c.nlos_cutoff_distance;
    j["nlos_excess_delay_max"] = c.nlos_excess_delay_max;
    j["blockage_probability"] = c.blockage_probability;
    j["nlos_angle_spread_deg"] = c.nlos_angle_spread_deg;
    j["tx_power_dbm"] = c.tx_power_dbm;
    j["reference_distance"] = c.reference_distance;
    j["pathloss_ceiling_db"] = c.pathloss_ceiling_db;
    j["seed"] = c.rng_seed;
    return j;
}

OrderedJson to_json(const regression::Hyper& h) {
    OrderedJson j;
    j["family"] = regression::to_string(h.family);
    j["solver"] = h.solver == regression::LinearSolver::LeastSquares ? "least_squares" : "gradient_descent";
    j["learning_rate"] = h.learning_rate;
    j["epochs"] = h.epochs;
    j["batch_size"] = h.batch_size;
    j["hidden_width"] = h.hidden_width;
    j["seed"] = h.seed;
    return j;
}

OrderedJson to_json(const adversary::AttackConfig& c) {
    OrderedJson j;
    j["epsilon"] = c.epsilon;
    j["fract"] = c.fract;
    j["space"] = adversary::to_string(c.space);
    j["clamp_to_physical"] = c.clamp_to_physical;
    j["seed"] = c.seed;
    return j;
}

OrderedJson to_json(const detection::DetectorHyper& h) {
    OrderedJson j;
    j["kind"] = detection::to_string(h.kind);
    j["expansion"] = detection::to_string(h.expansion);
    j["learning_rate"] = h.learning_rate;
    j["epochs"] = h.epochs;
    j["batch_size"] = h.batch_size;
    j["hidden_width"] = h.hidden_width;
    j["decision_threshold"] = h.decision_threshold;
    j["seed"] = h.seed;
    return j;
}

OrderedJson to_json(const llm::GatewayConfig& c) {
    OrderedJson j = OrderedJson::parse(c.describe());
    j.erase("api_key");
    j.erase("mock_seed");
    j["seed"] = c.mock_seed;
    return j;
}

}  // namespace airshield::config
