#include "airshield/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include "airshield/rng.hpp"

namespace airshield::regression {
namespace {

using nlohmann::json;

constexpr int kModelFormatVersion = 1;

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

void check_dimension(const RegressionModel& model, std::span<const double> x) {
    if (x.size() != model.dimension()) {
        throw std::invalid_argument("expected " + std::to_string(model.dimension()) +
                                    " features, got " + std::to_string(x.size()));
    }
}

struct MlpView {
    std::span<const double> w1, b1, w2;
    double b2;
};

MlpView mlp_view(const RegressionModel& m) {
    const std::size_t d = m.dimension();
    const std::size_t h = m.hidden_width;
    std::span<const double> t(m.theta);
    return {t.subspan(0, h * d), t.subspan(h * d, h), t.subspan(h * d + h, h), t[h * d + 2 * h]};
}

// Raw network output before target de-scaling; fills hidden activations if asked.
double mlp_forward(const RegressionModel& m, std::span<const double> z, std::vector<double>* act) {
    const MlpView v = mlp_view(m);
    const std::size_t d = m.dimension();
    double out = v.b2;
    if (act) act->resize(m.hidden_width);
    for (std::size_t k = 0; k < m.hidden_width; ++k) {
        double pre = v.b1[k];
        for (std::size_t i = 0; i < d; ++i) pre += v.w1[k * d + i] * z[i];
        const double a = std::tanh(pre);
        if (act) (*act)[k] = a;
        out += v.w2[k] * a;
    }
    return out;
}

double predict_standardized(const RegressionModel& m, std::span<const double> z) {
    if (m.family == Family::Linear) {
        const std::size_t d = m.dimension();
        double s = m.theta[d];
        for (std::size_t i = 0; i < d; ++i) s += m.theta[i] * z[i];
        return s;
    }
    return m.target_mean + m.target_scale * mlp_forward(m, z, nullptr);
}

// d prediction / d z.
std::vector<double> prediction_jacobian(const RegressionModel& m, std::span<const double> z) {
    const std::size_t d = m.dimension();
    std::vector<double> g(d, 0.0);
    if (m.family == Family::Linear) {
        std::copy_n(m.theta.begin(), d, g.begin());
        return g;
    }
    std::vector<double> act;
    mlp_forward(m, z, &act);
    const MlpView v = mlp_view(m);
    for (std::size_t k = 0; k < m.hidden_width; ++k) {
        const double back = m.target_scale * v.w2[k] * (1.0 - act[k] * act[k]);
        for (std::size_t i = 0; i < d; ++i) g[i] += back * v.w1[k * d + i];
    }
    return g;
}

std::vector<std::vector<double>> standardize_rows(const NormStats& norm,
                                                  const std::vector<std::vector<double>>& rows) {
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(norm.standardize(r));
    return out;
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void fit_linear_least_squares(RegressionModel& model, const std::vector<std::vector<double>>& z,
                              std::span<const double> y) {
    const auto n = static_cast<Eigen::Index>(z.size());
    const auto d = static_cast<Eigen::Index>(model.dimension());
    Eigen::MatrixXd design(n, d + 1);
    Eigen::VectorXd target(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) design(r, c) = z[r][c];
        design(r, d) = 1.0;
        target(r) = y[r];
    }
    const Eigen::VectorXd sol = design.colPivHouseholderQr().solve(target);
    model.theta.assign(sol.data(), sol.data() + sol.size());
}

double dataset_mse(const RegressionModel& m, const std::vector<std::vector<double>>& z,
                   std::span<const double> y) {
    double s = 0.0;
    for (std::size_t r = 0; r < z.size(); ++r) {
        const double e = predict_standardized(m, z[r]) - y[r];
        s += e * e;
    }
    return s / static_cast<double>(z.size());
}

// Mini-batch SGD on mean squared error. The MLP is trained against the
// standardized target; the linear family against the raw target.
void fit_sgd(RegressionModel& model, const std::vector<std::vector<double>>& z,
             std::span<const double> y, const Hyper& hyper, Rng& rng, FitTrace* trace) {
    const std::size_t n = z.size();
    const std::size_t d = model.dimension();
    const std::size_t h = model.hidden_width;
    const std::size_t batch = std::clamp<std::size_t>(hyper.batch_size, 1, n);
    const bool linear = model.family == Family::Linear;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad(model.theta.size());
    std::vector<double> act;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const auto& zr = z[order[b]];
                if (linear) {
                    const double e = predict_standardized(model, zr) - y[order[b]];
                    for (std::size_t i = 0; i < d; ++i) grad[i] += 2.0 * e * zr[i];
                    grad[d] += 2.0 * e;
                } else {
                    const double target = (y[order[b]] - model.target_mean) / model.target_scale;
                    const double e = mlp_forward(model, zr, &act) - target;
                    const MlpView v = mlp_view(model);
                    const std::size_t off_b1 = h * d, off_w2 = h * d + h, off_b2 = h * d + 2 * h;
                    for (std::size_t k = 0; k < h; ++k) {
                        const double back = 2.0 * e * v.w2[k] * (1.0 - act[k] * act[k]);
                        for (std::size_t i = 0; i < d; ++i) grad[k * d + i] += back * zr[i];
                        grad[off_b1 + k] += back;
                        grad[off_w2 + k] += 2.0 * e * act[k];
                    }
                    grad[off_b2] += 2.0 * e;
                }
            }
            const double step = hyper.learning_rate / static_cast<double>(stop - start);
            for (std::size_t p = 0; p < grad.size(); ++p) model.theta[p] -= step * grad[p];
        }
        if (trace) trace->epoch_mse.push_back(dataset_mse(model, z, y));
    }
}

}  // namespace

std::string_view to_string(Family f) noexcept {
    return f == Family::Linear ? "linear" : "mlp-1-hidden";
}

Family parse_family(std::string_view name) {
    if (name == "linear") return Family::Linear;
    if (name == "mlp-1-hidden" || name == "mlp") return Family::Mlp;
    throw std::invalid_argument("unknown regressor family: " + std::string(name));
}

NormStats NormStats::fit(const std::vector<std::vector<double>>& rows) {
    require(!rows.empty(), "cannot fit standardization on zero rows");
    const std::size_t d = rows.front().size();
    NormStats s;
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 0.0);
    const auto n = static_cast<double>(rows.size());
    for (const auto& r : rows)
        for (std::size_t i = 0; i < d; ++i) s.mean[i] += r[i];
    for (double& m : s.mean) m /= n;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < d; ++i) s.stddev[i] += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
    for (std::size_t i = 0; i < d; ++i) {
        s.stddev[i] = std::sqrt(s.stddev[i] / n);
        if (!(s.stddev[i] > 0.0)) {
            throw std::invalid_argument("feature " + std::to_string(i) + " is constant");
        }
    }
    return s;
}

std::vector<double> NormStats::standardize(std::span<const double> x) const {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean[i]) / stddev[i];
    return z;
}

std::vector<double> NormStats::destandardize(std::span<const double> z) const {
    std::vector<double> x(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] * stddev[i] + mean[i];
    return x;
}

void Dataset::validate() const {
    require(x.size() == y.size(), "dataset: feature and target row counts differ");
    require(!feature_names.empty(), "dataset: no feature names");
    for (std::size_t r = 0; r < x.size(); ++r) {
        require(x[r].size() == feature_names.size(),
                "dataset: row " + std::to_string(r) + " has wrong dimension");
        require(std::isfinite(y[r]), "dataset: non-finite target at row " + std::to_string(r));
        for (double v : x[r]) {
            require(std::isfinite(v), "dataset: non-finite feature at row " + std::to_string(r));
        }
    }
}

void Dataset::validate_for_fit() const {
    validate();
    require(size() >= 2, "dataset: at least two rows are required");
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    require(*lo != *hi, "dataset: target is constant");
}

Dataset Dataset::from_records(std::span<const ChannelRecord> records) {
    Dataset d;
    d.feature_names.assign(kFeatureNames.begin(), kFeatureNames.end());
    d.x.reserve(records.size());
    d.y.reserve(records.size());
    for (const ChannelRecord& r : records) {
        d.x.push_back(to_features(r));
        d.y.push_back(r.pathloss);
    }
    return d;
}

void RegressionModel::validate() const {
    const std::size_t d = dimension();
    require(d > 0, "model: empty feature order");
    require(norm.mean.size() == d && norm.stddev.size() == d, "model: norm stats dimension mismatch");
    for (double s : norm.stddev) require(s > 0.0 && std::isfinite(s), "model: stddev must be positive");
    for (double m : norm.mean) require(std::isfinite(m), "model: non-finite mean");
    const std::size_t expected =
        family == Family::Linear ? d + 1 : hidden_width * d + 2 * hidden_width + 1;
    require(family == Family::Linear || hidden_width > 0, "model: mlp needs hidden units");
    require(theta.size() == expected, "model: theta has wrong length");
    for (double t : theta) require(std::isfinite(t), "model: non-finite parameter");
    require(std::isfinite(target_mean) && target_scale > 0.0, "model: bad target scaling");
}

RegressionModel fit_regressor(const Dataset& data, const Hyper& hyper, FitTrace* trace) {
    data.validate_for_fit();
    require(hyper.learning_rate > 0.0, "hyper: learning_rate must be positive");
    require(hyper.batch_size >= 1, "hyper: batch_size must be >= 1");

    RegressionModel model;
    model.family = hyper.family;
    model.feature_order = data.feature_names;
    model.norm = NormStats::fit(data.x);
    const auto z = standardize_rows(model.norm, data.x);
    const std::size_t d = model.dimension();
    Rng rng(hyper.seed);

    if (hyper.family == Family::Linear) {
        if (hyper.solver == LinearSolver::LeastSquares) {
            fit_linear_least_squares(model, z, data.y);
            if (trace) trace->epoch_mse.push_back(dataset_mse(model, z, data.y));
        } else {
            model.theta.assign(d + 1, 0.0);
            fit_sgd(model, z, data.y, hyper, rng, trace);
        }
    } else {
        require(hyper.hidden_width >= 1, "hyper: hidden_width must be >= 1");
        const std::size_t h = hyper.hidden_width;
        model.hidden_width = h;
        model.target_mean = mean_of(data.y);
        double var = 0.0;
        for (double v : data.y) var += (v - model.target_mean) * (v - model.target_mean);
        model.target_scale = std::sqrt(var / static_cast<double>(data.size()));

        model.theta.assign(h * d + 2 * h + 1, 0.0);
        const double lim1 = 1.0 / std::sqrt(static_cast<double>(d));
        const double lim2 = 1.0 / std::sqrt(static_cast<double>(h));
        for (std::size_t p = 0; p < h * d + h; ++p) model.theta[p] = rng.uniform(-lim1, lim1);
        for (std::size_t p = h * d + h; p < h * d + 2 * h; ++p) model.theta[p] = rng.uniform(-lim2, lim2);
        fit_sgd(model, z, data.y, hyper, rng, trace);
    }
    model.validate();
    return model;
}

double predict(const RegressionModel& model, std::span<const double> x) {
    check_dimension(model, x);
    return predict_standardized(model, model.norm.standardize(x));
}

double loss(const RegressionModel& model, std::span<const double> x, double y) {
    const double e = predict(model, x) - y;
    return e * e;
}

std::vector<double> grad_standardized(const RegressionModel& model, std::span<const double> x,
                                      double y) {
    check_dimension(model, x);
    const auto z = model.norm.standardize(x);
    const double residual = predict_standardized(model, z) - y;
    std::vector<double> g = prediction_jacobian(model, z);
    for (double& gi : g) gi *= 2.0 * residual;
    return g;
}

std::vector<double> grad_input(const RegressionModel& model, std::span<const double> x, double y) {
    check_dimension(model, x);
    const auto z = model.norm.standardize(x);
    const double residual = predict_standardized(model, z) - y;
    std::vector<double> g = prediction_jacobian(model, z);
    // Linear family: exactly 2 r (theta / sigma).
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * residual * (g[i] / model.norm.stddev[i]);
    return g;
}

RegressionScores score_predictions(std::span<const double> predictions,
                                   std::span<const double> targets) {
    require(predictions.size() == targets.size(), "score: length mismatch");
    require(targets.size() >= 2, "score: at least two rows are required");
    const double ybar = mean_of(targets);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ss_res += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
        ss_tot += (targets[i] - ybar) * (targets[i] - ybar);
    }
    require(ss_tot > 0.0, "score: target is constant, R^2 undefined");
    return {ss_res / static_cast<double>(targets.size()), 1.0 - ss_res / ss_tot};
}

RegressionScores evaluate_regression(const RegressionModel& model, const Dataset& data) {
    data.validate();
    std::vector<double> pred;
    pred.reserve(data.size());
    for (const auto& row : data.x) pred.push_back(predict(model, row));
    return score_predictions(pred, data.y);
}

std::string serialize_model(const RegressionModel& model) {
    nlohmann::ordered_json doc;
    doc["format"] = "airshield-regressor";
    doc["version"] = kModelFormatVersion;
    doc["family"] = to_string(model.family);
    doc["feature_order"] = model.feature_order;
    doc["norm_stats"] = {{"mean", model.norm.mean}, {"stddev", model.norm.stddev}};
    doc["hidden_width"] = model.hidden_width;
    doc["target_mean"] = model.target_mean;
    doc["target_scale"] = model.target_scale;
    doc["theta"] = model.theta;
    return doc.dump(2) + "\n";
}

RegressionModel parse_model(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("model document: ") + e.what());
    }
    try {
        require(doc.at("format").get<std::string>() == "airshield-regressor",
                "model document: wrong format tag");
        require(doc.at("version").get<int>() == kModelFormatVersion,
                "model document: unsupported version");
        RegressionModel m;
        m.family = parse_family(doc.at("family").get<std::string>());
        m.feature_order = doc.at("feature_order").get<std::vector<std::string>>();
        m.norm.mean = doc.at("norm_stats").at("mean").get<std::vector<double>>();
        m.norm.stddev = doc.at("norm_stats").at("stddev").get<std::vector<double>>();
        m.hidden_width = doc.at("hidden_width").get<std::size_t>();
        m.target_mean = doc.at("target_mean").get<double>();
        m.target_scale = doc.at("target_scale").get<double>();
        m.theta = doc.at("theta").get<std::vector<double>>();
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("model document: ") + e.what());
    }
}

}  // namespace airshield::regression
