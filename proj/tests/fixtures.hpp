#pragma once

#include <string>

#include "airshield/emulator.hpp"
#include "airshield/pipeline.hpp"

namespace fixture {

// Small scene carried through poisoning, a 500-row split and detector training.
struct World {
    airshield::pipeline::ExperimentConfig cfg;
    airshield::regression::Dataset clean;
    airshield::regression::RegressionModel model;
    std::vector<airshield::adversary::LabeledSample> labeled;
    airshield::pipeline::Split split;
    airshield::detection::DetectorModel detector;
};

inline const World& small_world() {
    static const World w = [] {
        using namespace airshield;
        World out;
        out.cfg = pipeline::load_experiment_config(std::string(AIRSHIELD_CONFIG_DIR) + "/small.json");
        out.cfg.split.test_count = 500;
        out.clean = regression::Dataset::from_records(signal::generate_scene(out.cfg.scene));
        out.model = regression::fit_regressor(out.clean, out.cfg.regressor);
        out.labeled = adversary::poison_dataset(out.clean, out.model, out.cfg.attack);
        out.split = pipeline::split_dataset(out.labeled, out.cfg.split);
        out.detector = detection::train_detector(pipeline::textual(out.split.train), out.cfg.detector);
        return out;
    }();
    return w;
}

}  // namespace fixture
