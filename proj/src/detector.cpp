#include "airshield/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "airshield/rng.hpp"

namespace airshield::detection {
namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

double sigmoid(double t) noexcept {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

std::vector<double> expand(Expansion e, const std::vector<double>& z) {
    if (e == Expansion::None) return z;
    std::vector<double> out(z);
    out.reserve(2 * z.size());
    for (double v : z) out.push_back(v * v);
    if (e == Expansion::Quadratic)
        for (std::size_t i = 0; i < z.size(); ++i)
            for (std::size_t j = i + 1; j < z.size(); ++j) out.push_back(z[i] * z[j]);
    return out;
}

// Like NormStats::fit, but a constant expanded column is left unscaled.
regression::NormStats fit_tolerant(const std::vector<std::vector<double>>& rows) {
    const std::size_t m = rows.front().size();
    regression::NormStats s;
    s.mean.assign(m, 0.0);
    s.stddev.assign(m, 0.0);
    const auto n = static_cast<double>(rows.size());
    for (const auto& r : rows)
        for (std::size_t i = 0; i < m; ++i) s.mean[i] += r[i];
    for (double& v : s.mean) v /= n;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < m; ++i) s.stddev[i] += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
    for (double& v : s.stddev) {
        v = std::sqrt(v / n);
        if (!(v > 0.0)) v = 1.0;
    }
    return s;
}

double logit(const DetectorModel& m, std::span<const double> f, std::vector<double>* act) {
    const std::size_t dim = f.size();
    if (m.kind == DetectorKind::Logistic) {
        double t = m.theta[dim];
        for (std::size_t i = 0; i < dim; ++i) t += m.theta[i] * f[i];
        return t;
    }
    const std::size_t h = m.hidden_width;
    const double* w1 = m.theta.data();
    const double* b1 = w1 + h * dim;
    const double* w2 = b1 + h;
    double t = w2[h];
    if (act) act->resize(h);
    for (std::size_t k = 0; k < h; ++k) {
        double pre = b1[k];
        for (std::size_t i = 0; i < dim; ++i) pre += w1[k * dim + i] * f[i];
        const double a = std::tanh(pre);
        if (act) (*act)[k] = a;
        t += w2[k] * a;
    }
    return t;
}

double cross_entropy(double p, int y) {
    constexpr double kFloor = 1e-15;
    return y == 1 ? -std::log(std::max(p, kFloor)) : -std::log(std::max(1.0 - p, kFloor));
}

double safe_ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

std::string_view to_string(DetectorKind k) noexcept {
    return k == DetectorKind::Logistic ? "logistic" : "mlp-1-hidden";
}

DetectorKind parse_detector_kind(std::string_view name) {
    if (name == "logistic") return DetectorKind::Logistic;
    if (name == "mlp-1-hidden" || name == "mlp") return DetectorKind::Mlp;
    throw std::invalid_argument("unknown detector kind: " + std::string(name));
}

std::string_view to_string(Expansion e) noexcept {
    switch (e) {
        case Expansion::None: return "none";
        case Expansion::Squares: return "squares";
        case Expansion::Quadratic: return "quadratic";
    }
    return "none";
}

std::size_t expanded_size(Expansion e, std::size_t d) noexcept {
    switch (e) {
        case Expansion::None: return d;
        case Expansion::Squares: return 2 * d;
        case Expansion::Quadratic: return 2 * d + d * (d - 1) / 2;
    }
    return d;
}

Expansion parse_expansion(std::string_view name) {
    if (name == "none") return Expansion::None;
    if (name == "squares") return Expansion::Squares;
    if (name == "quadratic") return Expansion::Quadratic;
    throw std::invalid_argument("unknown feature expansion: " + std::string(name));
}

void DetectorModel::validate() const {
    const std::size_t d = dimension();
    require(d > 0, "detector: no input features");
    require(input_norm.dimension() == d, "detector: input norm dimension mismatch");
    const std::size_t m = expanded_size(expansion, d);
    require(expanded_norm.dimension() == m, "detector: expanded norm dimension mismatch");
    for (double s : input_norm.stddev) require(s > 0.0, "detector: stddev must be positive");
    for (double s : expanded_norm.stddev) require(s > 0.0, "detector: stddev must be positive");
    require(kind == DetectorKind::Logistic || hidden_width > 0, "detector: mlp needs hidden units");
    const std::size_t expected = kind == DetectorKind::Logistic ? m + 1 : hidden_width * m + 2 * hidden_width + 1;
    require(theta.size() == expected, "detector: theta has wrong length");
    for (double t : theta) require(std::isfinite(t), "detector: non-finite parameter");
    require(decision_threshold > 0.0 && decision_threshold < 1.0,
            "detector: decision_threshold must lie in (0, 1)");
}

std::vector<double> detector_features(const DetectorModel& model, std::span<const double> input) {
    if (input.size() != model.dimension()) {
        throw std::invalid_argument("detector: expected " + std::to_string(model.dimension()) +
                                    " inputs, got " + std::to_string(input.size()));
    }
    return model.expanded_norm.standardize(expand(model.expansion, model.input_norm.standardize(input)));
}

DetectorModel train_detector(const std::vector<std::vector<double>>& inputs,
                             std::span<const int> labels, std::vector<std::string> feature_names,
                             const DetectorHyper& hyper, DetectorTrace* trace) {
    require(!inputs.empty() && inputs.size() == labels.size(), "detector: inputs and labels differ in length");
    require(hyper.decision_threshold > 0.0 && hyper.decision_threshold < 1.0,
            "detector: decision_threshold must lie in (0, 1)");
    require(hyper.learning_rate > 0.0, "detector: learning_rate must be positive");
    bool seen[2] = {false, false};
    for (int y : labels) {
        require(y == 0 || y == 1, "detector: labels must be 0 or 1");
        seen[y] = true;
    }
    require(seen[0] && seen[1], "detector: training set must contain both classes");
    for (const auto& row : inputs) {
        require(row.size() == feature_names.size(), "detector: input dimension mismatch");
        for (double v : row) require(std::isfinite(v), "detector: non-finite input");
    }

    DetectorModel model;
    model.kind = hyper.kind;
    model.expansion = hyper.expansion;
    model.feature_names = std::move(feature_names);
    model.decision_threshold = hyper.decision_threshold;
    model.input_norm = regression::NormStats::fit(inputs);

    std::vector<std::vector<double>> expanded;
    expanded.reserve(inputs.size());
    for (const auto& row : inputs) expanded.push_back(expand(model.expansion, model.input_norm.standardize(row)));
    model.expanded_norm = fit_tolerant(expanded);
    for (auto& row : expanded) row = model.expanded_norm.standardize(row);

    const std::size_t n = inputs.size();
    const std::size_t m = model.expanded_dimension();
    Rng rng(hyper.seed);
    if (hyper.kind == DetectorKind::Logistic) {
        model.theta.assign(m + 1, 0.0);
    } else {
        require(hyper.hidden_width >= 1, "detector: hidden_width must be >= 1");
        const std::size_t h = hyper.hidden_width;
        model.hidden_width = h;
        model.theta.assign(h * m + 2 * h + 1, 0.0);
        const double lim1 = 1.0 / std::sqrt(static_cast<double>(m));
        const double lim2 = 1.0 / std::sqrt(static_cast<double>(h));
        for (std::size_t p = 0; p < h * m + h; ++p) model.theta[p] = rng.uniform(-lim1, lim1);
        for (std::size_t p = h * m + h; p < h * m + 2 * h; ++p) model.theta[p] = rng.uniform(-lim2, lim2);
    }

    const std::size_t batch = std::clamp<std::size_t>(hyper.batch_size, 1, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad(model.theta.size());
    std::vector<double> act;
    const std::size_t h = model.hidden_width;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const auto& f = expanded[order[b]];
                const double err = sigmoid(logit(model, f, &act)) - labels[order[b]];
                if (model.kind == DetectorKind::Logistic) {
                    for (std::size_t i = 0; i < m; ++i) grad[i] += err * f[i];
                    grad[m] += err;
                } else {
                    const double* w2 = model.theta.data() + h * m + h;
                    for (std::size_t k = 0; k < h; ++k) {
                        const double back = err * w2[k] * (1.0 - act[k] * act[k]);
                        for (std::size_t i = 0; i < m; ++i) grad[k * m + i] += back * f[i];
                        grad[h * m + k] += back;
                        grad[h * m + h + k] += err * act[k];
                    }
                    grad[h * m + 2 * h] += err;
                }
            }
            const double step = hyper.learning_rate / static_cast<double>(stop - start);
            for (std::size_t p = 0; p < grad.size(); ++p) model.theta[p] -= step * grad[p];
        }
        if (trace) {
            double total = 0.0;
            for (std::size_t r = 0; r < n; ++r) total += cross_entropy(sigmoid(logit(model, expanded[r], nullptr)), labels[r]);
            trace->epoch_loss.push_back(total / static_cast<double>(n));
        }
    }
    model.validate();
    return model;
}

std::vector<double> sample_columns(const adversary::LabeledSample& s) {
    const ColumnVector c = join_columns(s.x, s.y);
    return {c.begin(), c.end()};
}

DetectorModel train_detector(std::span<const adversary::LabeledSample> train,
                             const DetectorHyper& hyper, DetectorTrace* trace) {
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    inputs.reserve(train.size());
    labels.reserve(train.size());
    for (const auto& s : train) {
        inputs.push_back(sample_columns(s));
        labels.push_back(s.label);
    }
    return train_detector(inputs, labels, {kColumnNames.begin(), kColumnNames.end()}, hyper, trace);
}

Classification classify(const DetectorModel& model, std::span<const double> input) {
    const std::vector<double> f = detector_features(model, input);
    const double p = sigmoid(logit(model, f, nullptr));
    return {p >= model.decision_threshold ? 1 : 0, p};
}

double mean_cross_entropy(const DetectorModel& model, const std::vector<std::vector<double>>& inputs,
                          std::span<const int> labels) {
    require(!inputs.empty() && inputs.size() == labels.size(), "detector: inputs and labels differ in length");
    double total = 0.0;
    for (std::size_t r = 0; r < inputs.size(); ++r) {
        total += cross_entropy(classify(model, inputs[r]).probability, labels[r]);
    }
    return total / static_cast<double>(inputs.size());
}

Metrics compute_metrics(std::span<const int> predicted, std::span<const int> truth) {
    require(predicted.size() == truth.size(), "metrics: length mismatch");
    require(!truth.empty(), "metrics: empty input");
    Metrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int p = predicted[i];
        const int t = truth[i];
        require((p == 0 || p == 1) && (t == 0 || t == 1), "metrics: labels must be 0 or 1");
        if (p == 1 && t == 1) ++m.tp;
        else if (p == 1 && t == 0) ++m.fp;
        else if (p == 0 && t == 0) ++m.tn;
        else ++m.fn;
    }
    m.support = truth.size();

    ClassScores& mal = m.per_class[1];
    mal.precision = safe_ratio(m.tp, m.tp + m.fp);
    mal.recall = safe_ratio(m.tp, m.tp + m.fn);
    mal.f1 = harmonic(mal.precision, mal.recall);
    mal.support = m.tp + m.fn;

    ClassScores& ben = m.per_class[0];
    ben.precision = safe_ratio(m.tn, m.tn + m.fn);
    ben.recall = safe_ratio(m.tn, m.tn + m.fp);
    ben.f1 = harmonic(ben.precision, ben.recall);
    ben.support = m.tn + m.fp;

    m.precision = (ben.precision + mal.precision) / 2.0;
    m.recall = (ben.recall + mal.recall) / 2.0;
    m.f1 = harmonic(m.precision, m.recall);
    return m;
}

std::string metrics_report(const Metrics& m) {
    nlohmann::ordered_json doc;
    doc["averaging"] = "macro";
    doc["Precision"] = m.precision;
    doc["Recall"] = m.recall;
    doc["F1-score"] = m.f1;
    doc["support"] = m.support;
    doc["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    const char* names[2] = {"Benign", "Malicious"};
    for (std::size_t c = 0; c < 2; ++c) {
        doc["per_class"][names[c]] = {{"Precision", m.per_class[c].precision},
                                      {"Recall", m.per_class[c].recall},
                                      {"F1-score", m.per_class[c].f1},
                                      {"support", m.per_class[c].support}};
    }
    return doc.dump(2) + "\n";
}

std::string serialize_detector(const DetectorModel& model) {
    nlohmann::ordered_json doc;
    doc["format"] = "airshield-detector";
    doc["version"] = 1;
    doc["kind"] = to_string(model.kind);
    doc["expansion"] = to_string(model.expansion);
    doc["feature_names"] = model.feature_names;
    doc["input_norm"] = {{"mean", model.input_norm.mean}, {"stddev", model.input_norm.stddev}};
    doc["expanded_norm"] = {{"mean", model.expanded_norm.mean}, {"stddev", model.expanded_norm.stddev}};
    doc["hidden_width"] = model.hidden_width;
    doc["decision_threshold"] = model.decision_threshold;
    doc["theta"] = model.theta;
    return doc.dump(2) + "\n";
}

DetectorModel parse_detector(std::string_view text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        require(doc.at("format").get<std::string>() == "airshield-detector",
                "detector document: wrong format tag");
        require(doc.at("version").get<int>() == 1, "detector document: unsupported version");
        DetectorModel m;
        m.kind = parse_detector_kind(doc.at("kind").get<std::string>());
        m.expansion = parse_expansion(doc.at("expansion").get<std::string>());
        m.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        m.input_norm.mean = doc.at("input_norm").at("mean").get<std::vector<double>>();
        m.input_norm.stddev = doc.at("input_norm").at("stddev").get<std::vector<double>>();
        m.expanded_norm.mean = doc.at("expanded_norm").at("mean").get<std::vector<double>>();
        m.expanded_norm.stddev = doc.at("expanded_norm").at("stddev").get<std::vector<double>>();
        m.hidden_width = doc.at("hidden_width").get<std::size_t>();
        m.decision_threshold = doc.at("decision_threshold").get<double>();
        m.theta = doc.at("theta").get<std::vector<double>>();
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("detector document: ") + e.what());
    }
}

}  // namespace airshield::detection
