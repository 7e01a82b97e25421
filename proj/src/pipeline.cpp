#include "airshield/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "airshield/config.hpp"
#include "airshield/format.hpp"
#include "airshield/io.hpp"
#include "airshield/prompt_codec.hpp"
#include "airshield/rng.hpp"

namespace airshield::pipeline {

using config::Json;
using config::OrderedJson;

std::string_view to_string(Stage s) noexcept {
    switch (s) {
        case Stage::Config: return "config";
        case Stage::Emulate: return "emulate";
        case Stage::TrainRegressor: return "train-regressor";
        case Stage::Attack: return "attack";
        case Stage::Attribute: return "attribute";
        case Stage::TrainDetector: return "train-detector";
        case Stage::Evaluate: return "evaluate";
        case Stage::ExportSft: return "export-sft";
        case Stage::ClassifyLlm: return "classify-llm";
        case Stage::Explain: return "explain";
    }
    return "unknown";
}

int exit_code(Stage s) noexcept {
    switch (s) {
        case Stage::Config: return 2;
        case Stage::Emulate: return 10;
        case Stage::TrainRegressor: return 11;
        case Stage::Attack: return 12;
        case Stage::Attribute: return 13;
        case Stage::TrainDetector: return 14;
        case Stage::Evaluate: return 15;
        case Stage::ExportSft: return 16;
        case Stage::ClassifyLlm: return 17;
        case Stage::Explain: return 18;
    }
    return 1;
}

StageError::StageError(Stage stage, const std::string& what)
    : std::runtime_error(std::string(to_string(stage)) + ": " + what), stage_(stage) {}

void SplitConfig::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split: train_fraction must lie in (0, 1)");
    }
    if (test_count && *test_count < 1) throw std::invalid_argument("split: test_count must be at least 1");
}

std::size_t SplitConfig::test_rows(std::size_t n) const {
    if (test_count) return *test_count;
    const auto train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    return std::max<std::size_t>(1, n - std::min(train, n));
}

void AttributionConfig::validate() const {
    if (samples < 1) throw std::invalid_argument("attribution: samples must be at least 1");
    if (background_rows < 1) throw std::invalid_argument("attribution: background_rows must be at least 1");
    if (permutations < 1) throw std::invalid_argument("attribution: permutations must be at least 1");
}

void ExperimentConfig::validate() const {
    scene.validate();
    attack.validate();
    attribution.validate();
    split.validate();
    if (!(detector.decision_threshold > 0.0 && detector.decision_threshold < 1.0)) {
        throw std::invalid_argument("detector: decision_threshold must lie in (0, 1)");
    }
    if (gateway) gateway->validate();
    if (report_dir.empty()) throw std::invalid_argument("report_dir must not be empty");
}

namespace {

const Json& section(const Json& doc, const char* key) {
    static const Json empty = Json::object();
    const auto it = doc.find(key);
    return it == doc.end() || it->is_null() ? empty : *it;
}

SplitConfig split_from_json(const Json& j, std::uint64_t default_seed) {
    config::check_keys(j, {"train_fraction", "test_count", "seed"}, "split");
    SplitConfig c;
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    if (const auto it = j.find("test_count"); it != j.end()) {
        if (it->is_null()) c.test_count.reset();
        else if (!it->is_number_unsigned()) throw std::invalid_argument("split: test_count must be a positive integer");
        else c.test_count = it->get<std::size_t>();
    }
    c.seed = j.value("seed", default_seed);
    c.validate();
    return c;
}

AttributionConfig attribution_from_json(const Json& j, std::uint64_t default_seed) {
    config::check_keys(j, {"samples", "background_rows", "permutations", "seed"}, "attribution");
    AttributionConfig c;
    c.samples = j.value("samples", c.samples);
    c.background_rows = j.value("background_rows", c.background_rows);
    c.permutations = j.value("permutations", c.permutations);
    c.seed = j.value("seed", default_seed);
    c.validate();
    return c;
}

std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) { return derive_seed(master, stage); }

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text, std::optional<std::uint64_t> seed_override) {
    const Json doc = config::parse_document(json_text, "experiment config");
    try {
        config::check_keys(doc, {"seed", "report_dir", "scene", "regressor", "attack", "attribution", "split",
                                 "detector", "gateway"},
                           "experiment");
        ExperimentConfig c;
        c.master_seed = doc.value("seed", c.master_seed);
        if (seed_override) c.master_seed = *seed_override;
        const std::uint64_t m = c.master_seed;
        c.report_dir = doc.value("report_dir", c.report_dir.string());
        c.scene = config::scene_from_json(section(doc, "scene"), stage_seed(m, "scene"));
        c.regressor = config::regressor_from_json(section(doc, "regressor"), stage_seed(m, "regressor"));
        c.attack = config::attack_from_json(section(doc, "attack"), stage_seed(m, "attack"));
        c.attribution = attribution_from_json(section(doc, "attribution"), stage_seed(m, "attribution"));
        c.split = split_from_json(section(doc, "split"), stage_seed(m, "split"));
        c.detector = config::detector_from_json(section(doc, "detector"), stage_seed(m, "detector"));
        if (const auto it = doc.find("gateway"); it != doc.end() && !it->is_null()) {
            c.gateway = config::gateway_from_json(*it, stage_seed(m, "gateway"));
            c.gateway->api_key = llm::api_key_from_env();
        }
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw std::invalid_argument(std::string("experiment config: ") + e.what());
    }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file,
                                        std::optional<std::uint64_t> seed_override) {
    return parse_experiment_config(io::read_file(file), seed_override);
}

std::string describe(const ExperimentConfig& cfg) {
    OrderedJson j;
    j["seed"] = cfg.master_seed;
    j["report_dir"] = cfg.report_dir.generic_string();
    j["scene"] = config::to_json(cfg.scene);
    j["regressor"] = config::to_json(cfg.regressor);
    j["attack"] = config::to_json(cfg.attack);
    j["attribution"] = {{"samples", cfg.attribution.samples},
                        {"background_rows", cfg.attribution.background_rows},
                        {"permutations", cfg.attribution.permutations},
                        {"seed", cfg.attribution.seed}};
    OrderedJson split;
    split["train_fraction"] = cfg.split.train_fraction;
    split["test_count"] = cfg.split.test_count ? OrderedJson(*cfg.split.test_count) : OrderedJson(nullptr);
    split["seed"] = cfg.split.seed;
    j["split"] = split;
    j["detector"] = config::to_json(cfg.detector);
    j["gateway"] = cfg.gateway ? config::to_json(*cfg.gateway) : OrderedJson(nullptr);
    return j.dump(2);
}

Split split_dataset(std::span<const adversary::LabeledSample> labeled, const SplitConfig& cfg) {
    cfg.validate();
    const std::size_t n = labeled.size();
    const std::size_t test_n = cfg.test_rows(n);
    if (n < test_n + 2) {
        throw std::invalid_argument("split: " + std::to_string(n) + " rows cannot hold a test set of " +
                                    std::to_string(test_n) + " plus two training rows");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed, fnv1a("split"));
    rng.shuffle(std::span<std::size_t>(order));
    Split out;
    out.test.reserve(test_n);
    out.train.reserve(n - test_n);
    for (std::size_t k = 0; k < n; ++k) {
        (k < test_n ? out.test : out.train).push_back(labeled[order[k]]);
    }
    return out;
}

AttributionResult attribute(const regression::RegressionModel& model, const regression::Dataset& clean,
                            const AttributionConfig& cfg) {
    cfg.validate();
    clean.validate();
    const regression::Dataset background =
        attribution::subsample_background(clean, cfg.background_rows, derive_seed(cfg.seed, "background"));

    std::vector<std::size_t> order(clean.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed, fnv1a("samples"));
    rng.shuffle(std::span<std::size_t>(order));
    order.resize(std::min(cfg.samples, order.size()));
    std::sort(order.begin(), order.end());

    AttributionResult out;
    out.sample_ids = order;
    const bool exact = model.family == regression::Family::Linear;
    out.method = exact ? "exact-linear" : "permutation-sampling";
    const attribution::PredictFn fn = [&model](std::span<const double> x) { return regression::predict(model, x); };
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& x = clean.x[order[k]];
        rows.push_back(x);
        out.attributions.push_back(exact ? attribution::exact_shapley_linear(model, x, background)
                                         : attribution::sampling_shapley(fn, x, background, cfg.permutations,
                                                                         derive_seed(cfg.seed, order[k])));
    }
    out.importance = attribution::global_importance(out.attributions, rows);
    return out;
}

std::vector<adversary::LabeledSample> textual(std::span<const adversary::LabeledSample> samples) {
    std::vector<adversary::LabeledSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(prompt::textual_view(s));
    return out;
}

detection::Metrics evaluate_detector(const detection::DetectorModel& model,
                                     std::span<const adversary::LabeledSample> test) {
    std::vector<int> predicted, truth;
    for (const auto& s : test) {
        const auto seen = prompt::textual_view(s);
        predicted.push_back(detection::classify(model, detection::sample_columns(seen)).label);
        truth.push_back(s.label);
    }
    return detection::compute_metrics(predicted, truth);
}

namespace {

class Runner {
public:
    Runner(const ExperimentConfig& cfg, IncidentReport& report) : cfg_(cfg), report_(report) {}

    template <class F>
    void stage(Stage s, F&& body) {
        StageStatus status{std::string(to_string(s)), true, {}};
        current_ = &status;
        try {
            body();
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(s, e.what());
        }
        current_ = nullptr;
        report_.stages.push_back(std::move(status));
    }

    void skip(Stage s) { report_.stages.push_back({std::string(to_string(s)), false, {}}); }

    void write(const std::string& name, std::string_view content) {
        io::write_file(cfg_.report_dir / name, content);
        if (current_) current_->artifacts.push_back(name);
    }

private:
    const ExperimentConfig& cfg_;
    IncidentReport& report_;
    StageStatus* current_ = nullptr;
};

const adversary::LabeledSample* first_with_label(std::span<const adversary::LabeledSample> samples, int label) {
    for (const auto& s : samples) {
        if (s.label == label) return &s;
    }
    return nullptr;
}

}  // namespace

IncidentReport run_experiment(const ExperimentConfig& cfg) {
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw StageError(Stage::Config, e.what());
    }
    IncidentReport report;
    report.config_snapshot = describe(cfg);
    report.master_seed = cfg.master_seed;
    Runner run(cfg, report);

    std::vector<ChannelRecord> records;
    run.stage(Stage::Emulate, [&] {
        records = signal::generate_scene(cfg.scene);
        report.scene.records = records.size();
        for (const auto& r : records) {
            switch (r.los) {
                case LineOfSight::Clear: ++report.scene.los_clear; break;
                case LineOfSight::Obstructed: ++report.scene.los_obstructed; break;
                case LineOfSight::Blocked: ++report.scene.los_blocked; break;
            }
        }
        run.write("records.csv", io::records_to_csv(records));
    });

    regression::Dataset clean;
    regression::RegressionModel model;
    run.stage(Stage::TrainRegressor, [&] {
        clean = regression::Dataset::from_records(records);
        model = regression::fit_regressor(clean, cfg.regressor);
        report.regressor_scores = regression::evaluate_regression(model, clean);
        run.write("regressor.json", regression::serialize_model(model));
    });

    std::vector<adversary::LabeledSample> labeled;
    run.stage(Stage::Attack, [&] {
        labeled = adversary::poison_dataset(clean, model, cfg.attack);
        report.degradation = adversary::degradation_report(model, clean, labeled);
        run.write("labeled.csv", io::labeled_to_csv(labeled));
        run.write("degradation.json", adversary::serialize_report(report.degradation, cfg.attack));
    });

    run.stage(Stage::Attribute, [&] {
        const AttributionResult a = attribute(model, clean, cfg.attribution);
        report.attribution_method = a.method;
        report.importance = a.importance;
        run.write("attributions.csv", io::attributions_to_csv(a.attributions, a.sample_ids));
        run.write("global_importance.csv", io::importance_to_csv(a.importance));
        run.write("importance_points.csv", io::importance_points_to_csv(a.importance));
    });

    Split split;
    detection::DetectorModel detector;
    run.stage(Stage::TrainDetector, [&] {
        split = split_dataset(labeled, cfg.split);
        report.train_rows = split.train.size();
        report.test_rows = split.test.size();
        run.write("split_train.csv", io::labeled_to_csv(split.train));
        run.write("split_test.csv", io::labeled_to_csv(split.test));
        const auto seen = textual(split.train);
        detector = detection::train_detector(seen, cfg.detector);
        run.write("detector.json", detection::serialize_detector(detector));
    });

    run.stage(Stage::Evaluate, [&] {
        report.detector_metrics = evaluate_detector(detector, split.test);
        run.write("detector_metrics.json", detection::metrics_report(report.detector_metrics));
    });

    run.stage(Stage::ExportSft, [&] {
        const auto train_sft = prompt::build_sft_dataset(split.train);
        const auto test_sft = prompt::build_sft_dataset(split.test);
        report.sft_train_examples = train_sft.size();
        report.sft_test_examples = test_sft.size();
        run.write("sft_train.jsonl", prompt::export_sft_jsonl(train_sft));
        run.write("sft_test.jsonl", prompt::export_sft_jsonl(test_sft));
    });

    if (!cfg.gateway) {
        run.skip(Stage::ClassifyLlm);
        run.skip(Stage::Explain);
    } else {
        const llm::GatewayConfig& gw = *cfg.gateway;
        std::unique_ptr<llm::Backend> backend;
        run.stage(Stage::ClassifyLlm, [&] {
            backend = llm::make_backend(gw, detector);
            const std::string transcript = "transcripts/" + gw.run_id + ".jsonl";
            std::filesystem::create_directories(cfg.report_dir / "transcripts");
            llm::TranscriptStore store(cfg.report_dir / transcript, gw.run_id);
            report.llm = llm::classify_with_llm(*backend, gw, split.test, &store);
            run.write("llm_metrics.json", llm::classify_report(*report.llm, gw));
        });
        run.stage(Stage::Explain, [&] {
            const auto* benign = first_with_label(split.test, adversary::kBenign);
            const auto* malicious = first_with_label(split.test, adversary::kMalicious);
            if (!benign || !malicious) throw std::runtime_error("test set lacks one of the two classes");
            const auto idx = static_cast<std::size_t>(malicious - split.test.data());
            const prompt::Verdict v = report.llm->verdicts[idx];
            const std::string result = v == prompt::Verdict::Unparseable
                                           ? std::string("an unparseable answer")
                                           : std::string(v == prompt::Verdict::Malicious ? prompt::kMaliciousAnswer
                                                                                         : prompt::kBenignAnswer);
            report.explanations = llm::investigate_incident(*backend, gw, prompt::serialize_record(*benign),
                                                            prompt::serialize_record(*malicious), result);
            run.write("explanations.md", llm::render_explanations(report.explanations));
        });
    }

    io::write_file(cfg.report_dir / "report.json", render_report_json(report));
    io::write_file(cfg.report_dir / "report.md", render_report_markdown(report));
    return report;
}

namespace {

OrderedJson metrics_json(const detection::Metrics& m) { return OrderedJson::parse(detection::metrics_report(m)); }

std::string fixed(double v, int decimals = 4) { return format_fixed(v, decimals); }

}  // namespace

std::string render_report_json(const IncidentReport& r) {
    OrderedJson j;
    j["tool"] = {{"name", "airshield"}, {"version", kToolVersion}, {"record_template", prompt::kRecordTemplateVersion}};
    j["config"] = OrderedJson::parse(r.config_snapshot);
    j["stages"] = OrderedJson::array();
    for (const auto& s : r.stages) {
        j["stages"].push_back({{"name", s.name}, {"status", s.ran ? "ok" : "skipped"}, {"artifacts", s.artifacts}});
    }
    j["scene"] = {{"records", r.scene.records},
                  {"los_clear", r.scene.los_clear},
                  {"los_obstructed", r.scene.los_obstructed},
                  {"los_blocked", r.scene.los_blocked},
                  {"source", "records.csv"}};
    j["regressor"] = {{"mse", r.regressor_scores.mse}, {"r_squared", r.regressor_scores.r_squared},
                      {"source", "regressor.json"}};
    j["degradation"] = {{"mse_clean", r.degradation.mse_clean},
                        {"mse_poisoned", r.degradation.mse_poisoned},
                        {"delta_mse_pct", r.degradation.delta_mse_pct},
                        {"r2_clean", r.degradation.r2_clean},
                        {"r2_poisoned", r.degradation.r2_poisoned},
                        {"delta_r2_pct", r.degradation.delta_r2_pct},
                        {"poisoned_rows", r.degradation.poisoned_rows},
                        {"total_rows", r.degradation.total_rows},
                        {"source", "degradation.json"}};
    OrderedJson ranking = OrderedJson::array();
    for (std::size_t k = 0; k < r.importance.ranking.size(); ++k) {
        const std::size_t f = r.importance.ranking[k];
        ranking.push_back({{"rank", k + 1}, {"feature", r.importance.feature_order[f]},
                           {"mean_abs_shapley", r.importance.mean_abs[f]}});
    }
    j["attribution"] = {{"method", r.attribution_method},
                        {"data", "clean"},
                        {"ranking", ranking},
                        {"source", "global_importance.csv"}};
    j["detector"] = {{"train_rows", r.train_rows}, {"test_rows", r.test_rows},
                     {"averaging", "macro"}, {"metrics", metrics_json(r.detector_metrics)},
                     {"source", "detector_metrics.json"}};
    j["sft"] = {{"train_examples", r.sft_train_examples}, {"test_examples", r.sft_test_examples},
                {"source", {"sft_train.jsonl", "sft_test.jsonl"}}};
    if (r.llm) {
        j["llm"] = {{"status", "ok"},
                    {"metrics", metrics_json(r.llm->metrics)},
                    {"unparseable", r.llm->unparseable_count},
                    {"transport_failures", r.llm->transport_failures},
                    {"resumed", r.llm->resumed},
                    {"source", "llm_metrics.json"}};
    } else {
        j["llm"] = {{"status", "skipped"}};
    }
    if (!r.explanations.empty()) {
        OrderedJson sections = OrderedJson::array();
        for (const auto& e : r.explanations) sections.push_back(prompt::to_string(e.kind));
        j["explanations"] = {{"status", "ok"}, {"sections", sections}, {"source", "explanations.md"}};
    } else {
        j["explanations"] = {{"status", "skipped"}};
    }
    return j.dump(2) + "\n";
}

std::string render_report_markdown(const IncidentReport& r) {
    std::ostringstream md;
    md << "# Incident report\n\n";
    md << "airshield " << kToolVersion << ", record template " << prompt::kRecordTemplateVersion
       << ", master seed " << r.master_seed << ".\n\n";

    md << "## Stages\n\n| stage | status | artifacts |\n|---|---|---|\n";
    for (const auto& s : r.stages) {
        md << "| " << s.name << " | " << (s.ran ? "ok" : "skipped") << " | ";
        for (std::size_t k = 0; k < s.artifacts.size(); ++k) md << (k ? ", " : "") << s.artifacts[k];
        md << " |\n";
    }

    md << "\n## Scene\n\n" << r.scene.records << " records: " << r.scene.los_clear << " clear, "
       << r.scene.los_obstructed << " obstructed, " << r.scene.los_blocked << " blocked (records.csv).\n";
    md << "Regressor on clean data: MSE " << fixed(r.regressor_scores.mse) << " dB^2, R^2 "
       << fixed(r.regressor_scores.r_squared) << ".\n";

    const auto& d = r.degradation;
    md << "\n## Degradation\n\nSource: degradation.json. " << d.poisoned_rows << " of " << d.total_rows
       << " rows poisoned.\n\n| metric | clean | poisoned | change % |\n|---|---|---|---|\n";
    md << "| MSE | " << fixed(d.mse_clean) << " | " << fixed(d.mse_poisoned) << " | " << fixed(d.delta_mse_pct, 2)
       << " |\n";
    md << "| R^2 | " << fixed(d.r2_clean) << " | " << fixed(d.r2_poisoned) << " | " << fixed(d.delta_r2_pct, 2)
       << " |\n";

    md << "\n## Attribution\n\nMethod " << r.attribution_method
       << " on clean rows, mean-imputation background (global_importance.csv).\n\n"
          "| rank | feature | mean abs Shapley (dB) |\n|---|---|---|\n";
    for (std::size_t k = 0; k < r.importance.ranking.size(); ++k) {
        const std::size_t f = r.importance.ranking[k];
        md << "| " << k + 1 << " | " << r.importance.feature_order[f] << " | " << fixed(r.importance.mean_abs[f])
           << " |\n";
    }

    const auto metrics_table = [&md](const detection::Metrics& m) {
        md << "| Precision | Recall | F1-score |\n|---|---|---|\n| " << fixed(m.precision) << " | "
           << fixed(m.recall) << " | " << fixed(m.f1) << " |\n\n";
        md << "Confusion (malicious positive): tp " << m.tp << ", fp " << m.fp << ", tn " << m.tn << ", fn "
           << m.fn << ". Macro averages over both classes.\n";
    };
    md << "\n## Detector\n\n" << r.train_rows << " training rows, " << r.test_rows
       << " test rows (detector_metrics.json).\n\n";
    metrics_table(r.detector_metrics);
    md << "\nSFT export: " << r.sft_train_examples << " training and " << r.sft_test_examples
       << " test examples.\n";

    md << "\n## LLM classification\n\n";
    if (r.llm) {
        md << "Source: llm_metrics.json.\n\n";
        metrics_table(r.llm->metrics);
        md << "Unparseable answers " << r.llm->unparseable_count << ", transport failures "
           << r.llm->transport_failures << ", resumed from transcript " << r.llm->resumed << ".\n";
    } else {
        md << "Skipped (no gateway configured).\n";
    }

    md << "\n## Explanations\n\n";
    if (!r.explanations.empty()) {
        md << "Source: explanations.md (" << r.explanations.size() << " sections).\n";
    } else {
        md << "Skipped (no gateway configured).\n";
    }
    return md.str();
}

}  // namespace airshield::pipeline
