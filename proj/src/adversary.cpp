#include "airshield/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "airshield/rng.hpp"

namespace airshield::adversary {
namespace {

double sign_of(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double percent_change(double before, double after) {
    if (before == 0.0) throw std::invalid_argument("degradation: baseline metric is zero");
    return 100.0 * (after - before) / std::abs(before);
}

// Feature positions in the canonical 11-feature order.
enum Feature : std::size_t {
    kX, kY, kDistance, kDoaPhi, kDoaTheta, kDodPhi, kDodTheta, kPhase, kPower, kToa, kLos
};

double wrap(double v, double lo, double period) {
    double w = std::fmod(v - lo, period);
    if (w < 0.0) w += period;
    w += lo;
    return w >= lo + period ? lo : w;
}

}  // namespace

std::string_view to_string(AttackSpace s) noexcept {
    return s == AttackSpace::Standardized ? "standardized" : "raw";
}

AttackSpace parse_attack_space(std::string_view name) {
    if (name == "standardized") return AttackSpace::Standardized;
    if (name == "raw") return AttackSpace::Raw;
    throw std::invalid_argument("unknown attack space: " + std::string(name));
}

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        throw std::invalid_argument("attack: epsilon must be finite and >= 0");
    }
    if (!(fract >= 0.0 && fract <= 1.0)) throw std::invalid_argument("attack: fract must lie in [0, 1]");
}

std::vector<double> perturbation_scale(const regression::RegressionModel& model, AttackSpace space) {
    if (space == AttackSpace::Standardized) return model.norm.stddev;
    return std::vector<double>(model.dimension(), 1.0);
}

std::vector<double> fgsm_perturb(const regression::RegressionModel& model, std::span<const double> x,
                                 double y, double epsilon, AttackSpace space) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("fgsm: epsilon must be >= 0");
    std::vector<double> out(x.begin(), x.end());
    if (epsilon == 0.0) return out;
    const std::vector<double> grad = regression::grad_input(model, x, y);
    const std::vector<double> scale = perturbation_scale(model, space);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double s = sign_of(grad[i]);
        if (s != 0.0) out[i] = x[i] + s * (epsilon * scale[i]);
    }
    return out;
}

void clamp_to_physical(std::span<double> f) {
    if (f.size() != kFeatureCount) throw std::invalid_argument("clamp: expected 11 features");
    f[kDistance] = std::max(f[kDistance], 0.0);
    f[kDoaPhi] = wrap(f[kDoaPhi], -180.0, 360.0);
    f[kDodPhi] = wrap(f[kDodPhi], -180.0, 360.0);
    f[kDoaTheta] = std::clamp(f[kDoaTheta], 0.0, 180.0);
    f[kDodTheta] = std::clamp(f[kDodTheta], 0.0, 180.0);
    f[kPhase] = wrap(f[kPhase], 0.0, 360.0);
    f[kPower] = std::max(f[kPower], 0.0);
    f[kToa] = std::max(f[kToa], f[kDistance] / kSpeedOfLight);
    f[kLos] = std::clamp(std::round(f[kLos]), -1.0, 1.0);
}

std::vector<std::size_t> select_poisoned(std::size_t n, const AttackConfig& cfg) {
    cfg.validate();
    const auto k = static_cast<std::size_t>(std::llround(cfg.fract * static_cast<double>(n)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(cfg.seed, "select"));
    rng.shuffle(std::span(idx));
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<LabeledSample> poison_dataset(const regression::Dataset& data,
                                          const regression::RegressionModel& model,
                                          const AttackConfig& cfg) {
    cfg.validate();
    data.validate();
    if (data.dimension() != model.dimension()) {
        throw std::invalid_argument("attack: dataset and model dimensions differ");
    }
    std::vector<char> selected(data.size(), 0);
    if (cfg.epsilon > 0.0) {
        for (std::size_t i : select_poisoned(data.size(), cfg)) selected[i] = 1;
    }

    std::vector<LabeledSample> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        LabeledSample s;
        s.y = data.y[i];
        s.source_index = i;
        if (selected[i]) {
            s.x = fgsm_perturb(model, data.x[i], data.y[i], cfg.epsilon, cfg.space);
            if (cfg.clamp_to_physical) clamp_to_physical(s.x);
            s.label = kMalicious;
            s.applied_epsilon = cfg.epsilon;
        } else {
            s.x = data.x[i];
        }
        out.push_back(std::move(s));
    }
    Rng rng(derive_seed(cfg.seed, "order"));
    rng.shuffle(std::span(out));
    return out;
}

DegradationReport degradation_report(const regression::RegressionModel& model,
                                     const regression::Dataset& clean,
                                     std::span<const LabeledSample> poisoned) {
    if (clean.size() == 0 || poisoned.empty()) {
        throw std::invalid_argument("degradation: empty dataset");
    }
    const regression::RegressionScores before = regression::evaluate_regression(model, clean);

    std::vector<double> pred;
    std::vector<double> target;
    pred.reserve(poisoned.size());
    target.reserve(poisoned.size());
    // Score in source order so that an unpoisoned shuffle reproduces the clean
    // sums bit for bit.
    std::vector<std::size_t> order(poisoned.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return poisoned[a].source_index < poisoned[b].source_index;
    });
    std::size_t n_poisoned = 0;
    for (std::size_t k : order) {
        const LabeledSample& s = poisoned[k];
        pred.push_back(regression::predict(model, s.x));
        target.push_back(s.y);
        n_poisoned += s.label == kMalicious ? 1 : 0;
    }
    const regression::RegressionScores after = regression::score_predictions(pred, target);

    DegradationReport r;
    r.mse_clean = before.mse;
    r.mse_poisoned = after.mse;
    r.delta_mse_pct = percent_change(before.mse, after.mse);
    r.r2_clean = before.r_squared;
    r.r2_poisoned = after.r_squared;
    r.delta_r2_pct = percent_change(before.r_squared, after.r_squared);
    r.poisoned_rows = n_poisoned;
    r.total_rows = poisoned.size();
    return r;
}

std::string serialize_report(const DegradationReport& r, const AttackConfig& cfg) {
    nlohmann::ordered_json doc;
    doc["attack"] = {{"epsilon", cfg.epsilon},
                     {"fract", cfg.fract},
                     {"space", to_string(cfg.space)},
                     {"clamp_to_physical", cfg.clamp_to_physical},
                     {"seed", cfg.seed}};
    doc["model_evaluation"] = "fixed model, not retrained on poisoned rows";
    doc["mse_clean"] = r.mse_clean;
    doc["mse_poisoned"] = r.mse_poisoned;
    doc["delta_mse_pct"] = r.delta_mse_pct;
    doc["r2_clean"] = r.r2_clean;
    doc["r2_poisoned"] = r.r2_poisoned;
    doc["delta_r2_pct"] = r.delta_r2_pct;
    doc["poisoned_rows"] = r.poisoned_rows;
    doc["total_rows"] = r.total_rows;
    return doc.dump(2) + "\n";
}

}  // namespace airshield::adversary
