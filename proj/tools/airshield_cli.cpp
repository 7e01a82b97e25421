// Command line front end. Every subcommand reads the same experiment config
// (defaults when --config is omitted) and writes its artifacts under --out.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "airshield/config.hpp"
#include "airshield/io.hpp"
#include "airshield/pipeline.hpp"
#include "airshield/prompt_codec.hpp"

namespace {

using namespace airshield;
using pipeline::Stage;
using pipeline::StageError;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "master seed, overrides the config");
    cmd->add_option("--out", c.out, "output directory (defaults to the config's report_dir)");
}

pipeline::ExperimentConfig load(const Common& c) {
    try {
        auto cfg = c.config.empty() ? pipeline::parse_experiment_config("{}", c.seed)
                                    : pipeline::load_experiment_config(c.config, c.seed);
        if (!c.out.empty()) cfg.report_dir = c.out;
        return cfg;
    } catch (const std::exception& e) {
        throw StageError(Stage::Config, e.what());
    }
}

template <class F>
auto in_stage(Stage s, F&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(s, e.what());
    }
}

void wrote(const std::filesystem::path& p) { std::cout << "wrote " << p.generic_string() << '\n'; }

void save(const pipeline::ExperimentConfig& cfg, const std::string& name, std::string_view content) {
    const auto path = cfg.report_dir / name;
    io::write_file(path, content);
    wrote(path);
}

std::vector<ChannelRecord> read_records(const std::string& file) {
    return io::records_from_csv(io::read_file(file));
}

std::vector<adversary::LabeledSample> read_labeled(const std::string& file) {
    return io::labeled_from_csv(io::read_file(file));
}

llm::GatewayConfig gateway_for(const pipeline::ExperimentConfig& cfg, const std::string& backend) {
    llm::GatewayConfig gw = cfg.gateway ? *cfg.gateway : llm::GatewayConfig{};
    if (!backend.empty()) gw.backend = llm::parse_backend_kind(backend);
    gw.api_key = llm::api_key_from_env();
    gw.validate();
    return gw;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"airshield: adversarial poisoning of wireless channel data, detection and LLM triage"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(pipeline::kToolVersion));

    Common common;
    std::string records_file, model_file, labeled_file, detector_file, test_file, backend, name = "sft";

    auto* emulate = app.add_subcommand("emulate", "generate the channel scene, writes records.csv");
    add_common(emulate, common);

    auto* train_reg = app.add_subcommand("train-regressor", "fit the pathloss regressor, writes regressor.json");
    add_common(train_reg, common);
    auto* reg_records = train_reg->add_option("--records", records_file, "records CSV")->check(CLI::ExistingFile);
    auto* reg_labeled = train_reg->add_option("--labeled", labeled_file, "labeled CSV, to refit on poisoned rows")
                            ->check(CLI::ExistingFile);
    reg_records->excludes(reg_labeled);

    auto* attack = app.add_subcommand("attack", "poison records with FGSM, writes labeled.csv and degradation.json");
    add_common(attack, common);
    attack->add_option("--records", records_file, "records CSV")->required()->check(CLI::ExistingFile);
    attack->add_option("--model", model_file, "regressor JSON")->required()->check(CLI::ExistingFile);

    auto* attribute = app.add_subcommand("attribute", "Shapley attributions of the regressor on clean records");
    add_common(attribute, common);
    attribute->add_option("--records", records_file, "records CSV")->required()->check(CLI::ExistingFile);
    attribute->add_option("--model", model_file, "regressor JSON")->required()->check(CLI::ExistingFile);

    auto* train_det = app.add_subcommand("train-detector", "split labeled rows and train the poisoning detector");
    add_common(train_det, common);
    train_det->add_option("--labeled", labeled_file, "labeled CSV")->required()->check(CLI::ExistingFile);

    auto* evaluate = app.add_subcommand("evaluate", "score the detector, writes detector_metrics.json");
    add_common(evaluate, common);
    evaluate->add_option("--detector", detector_file, "detector JSON")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--test", test_file, "labeled test CSV")->required()->check(CLI::ExistingFile);

    auto* export_sft = app.add_subcommand("export-sft", "write instruction/input/output JSONL");
    add_common(export_sft, common);
    export_sft->add_option("--labeled", labeled_file, "labeled CSV")->required()->check(CLI::ExistingFile);
    export_sft->add_option("--name", name, "output file stem")->capture_default_str();

    auto* classify = app.add_subcommand("classify-llm", "classify test rows through the chat-completions gateway");
    add_common(classify, common);
    classify->add_option("--test", test_file, "labeled test CSV")->required()->check(CLI::ExistingFile);
    classify->add_option("--detector", detector_file, "detector JSON backing the mock verdicts")
        ->check(CLI::ExistingFile);
    classify->add_option("--backend", backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));

    auto* explain = app.add_subcommand("explain", "run the three explainability prompts over one incident");
    add_common(explain, common);
    explain->add_option("--test", test_file, "labeled test CSV")->required()->check(CLI::ExistingFile);
    explain->add_option("--backend", backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));

    auto* run = app.add_subcommand("run-experiment", "all stages in order, writes report.md and report.json");
    add_common(run, common);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load(common);

        if (emulate->parsed()) {
            in_stage(Stage::Emulate, [&] {
                save(cfg, "records.csv", io::records_to_csv(signal::generate_scene(cfg.scene)));
                return 0;
            });
        } else if (train_reg->parsed()) {
            in_stage(Stage::TrainRegressor, [&] {
                regression::Dataset data;
                if (records_file.empty() && labeled_file.empty()) {
                    throw std::invalid_argument("train-regressor needs --records or --labeled");
                }
                if (!labeled_file.empty()) {
                    data.feature_names.assign(kFeatureNames.begin(), kFeatureNames.end());
                    for (auto& row : read_labeled(labeled_file)) {
                        data.x.push_back(std::move(row.x));
                        data.y.push_back(row.y);
                    }
                } else {
                    data = regression::Dataset::from_records(read_records(records_file));
                }
                const auto model = regression::fit_regressor(data, cfg.regressor);
                const auto scores = regression::evaluate_regression(model, data);
                save(cfg, "regressor.json", regression::serialize_model(model));
                std::cout << "mse " << scores.mse << " r2 " << scores.r_squared << '\n';
                return 0;
            });
        } else if (attack->parsed()) {
            in_stage(Stage::Attack, [&] {
                const auto data = regression::Dataset::from_records(read_records(records_file));
                const auto model = regression::parse_model(io::read_file(model_file));
                const auto labeled = adversary::poison_dataset(data, model, cfg.attack);
                const auto rep = adversary::degradation_report(model, data, labeled);
                save(cfg, "labeled.csv", io::labeled_to_csv(labeled));
                save(cfg, "degradation.json", adversary::serialize_report(rep, cfg.attack));
                return 0;
            });
        } else if (attribute->parsed()) {
            in_stage(Stage::Attribute, [&] {
                const auto data = regression::Dataset::from_records(read_records(records_file));
                const auto model = regression::parse_model(io::read_file(model_file));
                const auto a = pipeline::attribute(model, data, cfg.attribution);
                save(cfg, "attributions.csv", io::attributions_to_csv(a.attributions, a.sample_ids));
                save(cfg, "global_importance.csv", io::importance_to_csv(a.importance));
                save(cfg, "importance_points.csv", io::importance_points_to_csv(a.importance));
                return 0;
            });
        } else if (train_det->parsed()) {
            in_stage(Stage::TrainDetector, [&] {
                const auto labeled = read_labeled(labeled_file);
                const auto split = pipeline::split_dataset(labeled, cfg.split);
                save(cfg, "split_train.csv", io::labeled_to_csv(split.train));
                save(cfg, "split_test.csv", io::labeled_to_csv(split.test));
                const auto seen = pipeline::textual(split.train);
                save(cfg, "detector.json", detection::serialize_detector(detection::train_detector(seen, cfg.detector)));
                return 0;
            });
        } else if (evaluate->parsed()) {
            in_stage(Stage::Evaluate, [&] {
                const auto model = detection::parse_detector(io::read_file(detector_file));
                const auto m = pipeline::evaluate_detector(model, read_labeled(test_file));
                save(cfg, "detector_metrics.json", detection::metrics_report(m));
                std::cout << "Precision " << m.precision << " Recall " << m.recall << " F1-score " << m.f1 << '\n';
                return 0;
            });
        } else if (export_sft->parsed()) {
            in_stage(Stage::ExportSft, [&] {
                const auto labeled = read_labeled(labeled_file);
                save(cfg, name + ".jsonl", prompt::export_sft_jsonl(prompt::build_sft_dataset(labeled)));
                return 0;
            });
        } else if (classify->parsed()) {
            in_stage(Stage::ClassifyLlm, [&] {
                const auto gw = gateway_for(cfg, backend);
                std::optional<detection::DetectorModel> det;
                if (!detector_file.empty()) det = detection::parse_detector(io::read_file(detector_file));
                auto be = llm::make_backend(gw, det);
                const auto test = read_labeled(test_file);
                llm::TranscriptStore store(cfg.report_dir / "transcripts" / (gw.run_id + ".jsonl"), gw.run_id);
                const auto result = llm::classify_with_llm(*be, gw, test, &store);
                save(cfg, "llm_metrics.json", llm::classify_report(result, gw));
                return 0;
            });
        } else if (explain->parsed()) {
            in_stage(Stage::Explain, [&] {
                const auto gw = gateway_for(cfg, backend);
                auto be = llm::make_backend(gw);
                const auto test = read_labeled(test_file);
                const adversary::LabeledSample* benign = nullptr;
                const adversary::LabeledSample* malicious = nullptr;
                for (const auto& s : test) {
                    if (!benign && s.label == adversary::kBenign) benign = &s;
                    if (!malicious && s.label == adversary::kMalicious) malicious = &s;
                }
                if (!benign || !malicious) throw std::runtime_error("test set lacks one of the two classes");
                const auto t = llm::investigate_incident(*be, gw, prompt::serialize_record(*benign),
                                                         prompt::serialize_record(*malicious),
                                                         std::string(prompt::kMaliciousAnswer));
                save(cfg, "explanations.md", llm::render_explanations(t));
                return 0;
            });
        } else if (run->parsed()) {
            const auto report = pipeline::run_experiment(cfg);
            for (const auto& s : report.stages) {
                std::cout << s.name << ": " << (s.ran ? "ok" : "skipped") << '\n';
            }
            wrote(cfg.report_dir / "report.md");
            std::cout << "detector F1-score " << report.detector_metrics.f1 << '\n';
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code();
    }
    return 0;
}
