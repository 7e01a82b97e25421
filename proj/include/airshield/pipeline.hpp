#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "airshield/adversary.hpp"
#include "airshield/attribution.hpp"
#include "airshield/detector.hpp"
#include "airshield/emulator.hpp"
#include "airshield/llm_gateway.hpp"
#include "airshield/regressor.hpp"

namespace airshield::pipeline {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class Stage {
    Config,
    Emulate,
    TrainRegressor,
    Attack,
    Attribute,
    TrainDetector,
    Evaluate,
    ExportSft,
    ClassifyLlm,
    Explain,
};

std::string_view to_string(Stage s) noexcept;
/// Process exit code reported when the stage fails. 0 is never used.
int exit_code(Stage s) noexcept;

class StageError : public std::runtime_error {
public:
    StageError(Stage stage, const std::string& what);
    Stage stage() const noexcept { return stage_; }
    int code() const noexcept { return exit_code(stage_); }

private:
    Stage stage_;
};

struct SplitConfig {
    double train_fraction = 0.9;            // used only without test_count
    std::optional<std::size_t> test_count = 500;
    std::uint64_t seed = 17;

    void validate() const;
    std::size_t test_rows(std::size_t n) const;
};

struct AttributionConfig {
    std::size_t samples = 200;          // explained rows, drawn from clean data
    std::size_t background_rows = 512;
    std::size_t permutations = 1000;    // sampling path (mlp) only
    std::uint64_t seed = 19;

    void validate() const;
};

struct ExperimentConfig {
    std::uint64_t master_seed = 2024;
    signal::SceneConfig scene;
    regression::Hyper regressor;
    adversary::AttackConfig attack;
    AttributionConfig attribution;
    SplitConfig split;
    detection::DetectorHyper detector;
    std::optional<llm::GatewayConfig> gateway;
    std::filesystem::path report_dir = "report";

    void validate() const;
};

/// Stage sections absent from the document keep their defaults; a stage
/// without an explicit "seed" gets derive_seed(master, stage name). A
/// seed_override replaces the master seed before that derivation.
ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_experiment_config(const std::filesystem::path& file,
                                        std::optional<std::uint64_t> seed_override = std::nullopt);
/// JSON snapshot, api key excluded.
std::string describe(const ExperimentConfig& cfg);

struct Split {
    std::vector<adversary::LabeledSample> train;
    std::vector<adversary::LabeledSample> test;
};

/// Seeded split without replacement. Needs at least test_rows + 2 samples.
Split split_dataset(std::span<const adversary::LabeledSample> labeled, const SplitConfig& cfg);

/// Explained rows (indices into the clean dataset) and their attributions.
struct AttributionResult {
    std::string method;  // "exact-linear" or "permutation-sampling"
    std::vector<std::size_t> sample_ids;
    std::vector<attribution::Attribution> attributions;
    attribution::GlobalImportance importance;
};

AttributionResult attribute(const regression::RegressionModel& model, const regression::Dataset& clean,
                            const AttributionConfig& cfg);

/// Textual view of every sample: what a language model reading the rendered
/// record would see.
std::vector<adversary::LabeledSample> textual(std::span<const adversary::LabeledSample> samples);

/// Detector predictions over the textual view of the test set.
detection::Metrics evaluate_detector(const detection::DetectorModel& model,
                                     std::span<const adversary::LabeledSample> test);

struct StageStatus {
    std::string name;
    bool ran = false;
    std::vector<std::string> artifacts;  // relative to report_dir
};

struct SceneSummary {
    std::size_t records = 0;
    std::size_t los_clear = 0;
    std::size_t los_obstructed = 0;
    std::size_t los_blocked = 0;
};

struct IncidentReport {
    std::string config_snapshot;  // JSON
    std::uint64_t master_seed = 0;
    SceneSummary scene;
    regression::RegressionScores regressor_scores;  // clean data
    adversary::DegradationReport degradation;
    std::string attribution_method;
    attribution::GlobalImportance importance;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    detection::Metrics detector_metrics;
    std::size_t sft_train_examples = 0;
    std::size_t sft_test_examples = 0;
    std::optional<llm::ClassifyRun> llm;
    std::vector<llm::ExplanationTranscript> explanations;
    std::vector<StageStatus> stages;
};

/// Runs every stage in order and writes all artifacts plus report.md and
/// report.json to cfg.report_dir. Failures surface as StageError; files written
/// before the failure stay in place.
IncidentReport run_experiment(const ExperimentConfig& cfg);

std::string render_report_markdown(const IncidentReport& report);
std::string render_report_json(const IncidentReport& report);

}  // namespace airshield::pipeline
