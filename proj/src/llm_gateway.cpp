#include "airshield/llm_gateway.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "airshield/rng.hpp"

namespace airshield::llm {
namespace {

using Clock = std::chrono::steady_clock;
using prompt::PromptKind;
using prompt::Verdict;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::chrono::microseconds to_duration(double seconds) {
    return std::chrono::microseconds(static_cast<long long>(std::llround(seconds * 1e6)));
}

CompletionResult failure(TransportStatus status, std::string detail) {
    CompletionResult r;
    r.status = status;
    r.detail = std::move(detail);
    return r;
}

CompletionResult success(std::string text) {
    CompletionResult r;
    r.status = TransportStatus::Ok;
    r.text = std::move(text);
    return r;
}

bool is_retryable(TransportStatus s) {
    return s == TransportStatus::RateLimited || s == TransportStatus::ServerError;
}

std::string explain_prefix(PromptKind kind) {
    const std::string_view t = prompt::prompt_template(kind);
    return std::string(t.substr(0, t.find('{')));
}

std::string mock_analysis(PromptKind kind, std::uint64_t digest) {
    std::ostringstream out;
    switch (kind) {
        case PromptKind::ExplainReasoning:
            out << "**Chain of Thoughts:**\n"
                   "1. Geometry: the distance, coordinates and angles were checked for mutual consistency.\n"
                   "2. Timing: the arrival time was compared with the propagation delay implied by the distance.\n"
                   "3. Power: the received power was compared with the stated path loss.\n"
                   "4. Line of sight: the status was checked against the set of admissible values.\n"
                   "Conclusion: the verdict follows from the consistency of these features.";
            break;
        case PromptKind::ExplainFeatureImportance:
            out << "The most informative numerical features are the distance between the user and "
                   "the base station, the signal arrival time and the line of sight status, because "
                   "an adversarial change breaks the physical relations between them.";
            break;
        case PromptKind::ExplainPairComparison:
            out << "## Analysis of Adversarial Attack on Traffic Data\n"
                   "- Every feature of the second row is shifted by a fixed step relative to a "
                   "physically consistent record.\n"
                   "- Recommendations: validate records against propagation physics, use anomaly "
                   "detection, and train on verified data.";
            break;
        case PromptKind::Classify:
            break;
    }
    char tag[32];
    std::snprintf(tag, sizeof tag, "%016llx", static_cast<unsigned long long>(digest));
    out << "\n[mock analysis " << tag << "]";
    return out.str();
}

}  // namespace

std::string_view to_string(BackendKind k) noexcept { return k == BackendKind::Mock ? "mock" : "remote"; }

BackendKind parse_backend_kind(std::string_view name) {
    if (name == "mock") return BackendKind::Mock;
    if (name == "remote") return BackendKind::Remote;
    throw std::invalid_argument("unknown backend: " + std::string(name));
}

void GatewayConfig::validate() const {
    if (max_parallel_requests < 1) throw std::invalid_argument("gateway: max_parallel_requests must be >= 1");
    if (!(request_timeout > 0.0)) throw std::invalid_argument("gateway: request_timeout must be positive");
    if (!(temperature >= 0.0)) throw std::invalid_argument("gateway: temperature must be >= 0");
    if (!(retry.backoff_base_seconds >= 0.0)) throw std::invalid_argument("gateway: backoff must be >= 0");
    if (!(abort_threshold >= 0.0 && abort_threshold <= 1.0)) {
        throw std::invalid_argument("gateway: abort_threshold must lie in [0, 1]");
    }
    if (backend == BackendKind::Remote && endpoint_url.empty()) {
        throw std::invalid_argument("gateway: remote backend needs endpoint_url");
    }
}

std::string GatewayConfig::describe() const {
    nlohmann::ordered_json doc;
    doc["backend"] = to_string(backend);
    doc["endpoint_url"] = endpoint_url;
    doc["model_name"] = model_name;
    doc["max_output_tokens"] = max_output_tokens;
    doc["temperature"] = temperature;
    doc["request_timeout"] = request_timeout;
    doc["max_parallel_requests"] = max_parallel_requests;
    doc["retry"] = {{"max_retries", retry.max_retries}, {"backoff_base_seconds", retry.backoff_base_seconds}};
    doc["abort_threshold"] = abort_threshold;
    doc["mock_seed"] = mock_seed;
    doc["run_id"] = run_id;
    doc["api_key"] = api_key.empty() ? "unset" : "set";
    return doc.dump(2);
}

std::string api_key_from_env() {
    const char* v = std::getenv(std::string(kApiKeyEnv).c_str());
    return v ? std::string(v) : std::string();
}

std::string_view to_string(TransportStatus s) noexcept {
    switch (s) {
        case TransportStatus::Ok: return "ok";
        case TransportStatus::Timeout: return "timeout";
        case TransportStatus::RateLimited: return "rate_limited";
        case TransportStatus::ServerError: return "server_error";
        case TransportStatus::Malformed: return "malformed";
    }
    return "malformed";
}

TransportStatus parse_transport_status(std::string_view name) {
    for (TransportStatus s : {TransportStatus::Ok, TransportStatus::Timeout, TransportStatus::RateLimited,
                              TransportStatus::ServerError, TransportStatus::Malformed}) {
        if (to_string(s) == name) return s;
    }
    throw std::invalid_argument("unknown transport status: " + std::string(name));
}

std::string build_request_body(const GatewayConfig& cfg, std::string_view instruction,
                               std::string_view input) {
    nlohmann::ordered_json body;
    body["model"] = cfg.model_name;
    body["messages"] = nlohmann::ordered_json::array(
        {{{"role", "system"}, {"content", instruction}}, {{"role", "user"}, {"content", input}}});
    body["temperature"] = cfg.temperature;
    body["max_tokens"] = cfg.max_output_tokens;
    return body.dump();
}

CompletionResult parse_response_body(std::string_view body) {
    const auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return failure(TransportStatus::Malformed, "response is not a JSON object");
    const auto choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty()) {
        return failure(TransportStatus::Malformed, "response has no choices");
    }
    const auto& first = choices->front();
    if (!first.is_object() || !first.contains("message") || !first["message"].is_object() ||
        !first["message"].contains("content") || !first["message"]["content"].is_string()) {
        return failure(TransportStatus::Malformed, "first choice has no message content");
    }
    CompletionResult r = success(first["message"]["content"].get<std::string>());
    const auto usage = doc.find("usage");
    if (usage != doc.end() && usage->is_object() && usage->contains("prompt_tokens") &&
        usage->contains("completion_tokens") && (*usage)["prompt_tokens"].is_number_unsigned() &&
        (*usage)["completion_tokens"].is_number_unsigned()) {
        r.tokens = TokenCounts{(*usage)["prompt_tokens"].get<std::size_t>(),
                               (*usage)["completion_tokens"].get<std::size_t>()};
    }
    return r;
}

RemoteBackend::RemoteBackend(GatewayConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const std::string& url = cfg_.endpoint_url;
    const std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("gateway: endpoint_url needs a scheme");
    const std::size_t path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    std::string base = path_start == std::string::npos ? std::string() : url.substr(path_start);
    while (!base.empty() && base.back() == '/') base.pop_back();
    path_ = base + "/chat/completions";
}

CompletionResult RemoteBackend::complete(std::string_view instruction, std::string_view input) {
    const auto t0 = Clock::now();
    const std::string body = build_request_body(cfg_, instruction, input);
    const auto timeout = to_duration(cfg_.request_timeout);

    CompletionResult result;
    const std::size_t max_attempts = cfg_.retry.max_retries + 1;
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                to_duration(cfg_.retry.backoff_base_seconds * std::ldexp(1.0, static_cast<int>(attempt - 1))));
        }
        httplib::Client client(origin_);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        if (!cfg_.api_key.empty()) client.set_bearer_token_auth(cfg_.api_key);

        const auto res = client.Post(path_, body, "application/json");
        if (!res) {
            const httplib::Error err = res.error();
            if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
                result = failure(TransportStatus::Timeout, "request timed out");
            } else {
                result = failure(TransportStatus::ServerError, "transport error: " + httplib::to_string(err));
            }
        } else if (res->status == 429) {
            result = failure(TransportStatus::RateLimited, "HTTP 429");
        } else if (res->status >= 500) {
            result = failure(TransportStatus::ServerError, "HTTP " + std::to_string(res->status));
        } else if (res->status < 200 || res->status >= 300) {
            result = failure(TransportStatus::ServerError, "HTTP " + std::to_string(res->status));
            result.attempts = attempt + 1;
            break;  // client errors are not retried
        } else {
            result = parse_response_body(res->body);
        }
        result.attempts = attempt + 1;
        if (!is_retryable(result.status)) break;
    }
    result.latency = seconds_since(t0);
    return result;
}

MockBackend::MockBackend(std::uint64_t seed, std::optional<detection::DetectorModel> detector)
    : seed_(seed), detector_(std::move(detector)) {
    if (detector_ && detector_->dimension() != kColumnCount) {
        throw std::invalid_argument("mock backend: detector must take the 12 record columns");
    }
}

CompletionResult MockBackend::complete(std::string_view instruction, std::string_view input) {
    CompletionResult r;
    r.attempts = 1;
    if (instruction == prompt::kClassifyInstruction) {
        for (PromptKind k : {PromptKind::ExplainReasoning, PromptKind::ExplainFeatureImportance,
                             PromptKind::ExplainPairComparison}) {
            if (input.starts_with(explain_prefix(k))) {
                r = success(mock_analysis(k, derive_seed(seed_, input)));
                r.attempts = 1;
                return r;
            }
        }
        const auto columns = prompt::parse_record_text(input);
        if (!columns) {
            r = success(std::string(kMockRefusal));
        } else if (detector_) {
            const int label = detection::classify(*detector_, *columns).label;
            r = success(std::string(prompt::answer_for(label)));
        } else {
            r = success(std::string(prompt::answer_for(static_cast<int>(derive_seed(seed_, input) & 1U))));
        }
    } else {
        r = success(std::string(kMockRefusal));
    }
    r.attempts = 1;
    return r;
}

std::unique_ptr<Backend> make_backend(const GatewayConfig& cfg,
                                      std::optional<detection::DetectorModel> detector) {
    cfg.validate();
    if (cfg.backend == BackendKind::Mock) return std::make_unique<MockBackend>(cfg.mock_seed, std::move(detector));
    return std::make_unique<RemoteBackend>(cfg);
}

TranscriptStore::TranscriptStore(std::filesystem::path file, std::string run_id)
    : file_(std::move(file)), run_id_(std::move(run_id)) {
    std::ifstream in(file_, std::ios::binary);
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    torn_tail_ = !content.empty() && content.back() != '\n';
    std::istringstream lines(content);
    std::string line;
    while (std::getline(lines, line)) {
        const auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) continue;  // torn final line after a crash
        try {
            Entry e;
            e.run_id = doc.at("run_id").get<std::string>();
            e.record_index = doc.at("record_index").get<std::size_t>();
            e.input = doc.at("input").get<std::string>();
            e.status = parse_transport_status(doc.at("status").get<std::string>());
            e.text = doc.at("text").get<std::string>();
            e.attempts = doc.at("attempts").get<std::size_t>();
            if (e.run_id == run_id_ && e.status == TransportStatus::Ok) done_[e.record_index] = std::move(e);
        } catch (const std::exception&) {
            continue;
        }
    }
}

std::optional<TranscriptStore::Entry> TranscriptStore::completed(std::size_t record_index) const {
    std::lock_guard lock(mu_);
    const auto it = done_.find(record_index);
    if (it == done_.end()) return std::nullopt;
    return it->second;
}

void TranscriptStore::append(const Entry& e) {
    nlohmann::ordered_json doc;
    doc["run_id"] = e.run_id;
    doc["record_index"] = e.record_index;
    doc["input"] = e.input;
    doc["status"] = to_string(e.status);
    doc["text"] = e.text;
    doc["attempts"] = e.attempts;
    std::lock_guard lock(mu_);
    std::ofstream out(file_, std::ios::app);
    if (torn_tail_) out << '\n';
    torn_tail_ = false;
    out << doc.dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("transcript: cannot append to " + file_.string());
    if (e.status == TransportStatus::Ok) done_[e.record_index] = e;
}

ClassifyRun classify_with_llm(Backend& backend, const GatewayConfig& cfg,
                              std::span<const adversary::LabeledSample> testset,
                              TranscriptStore* transcripts) {
    cfg.validate();
    if (testset.empty()) throw std::invalid_argument("classify_with_llm: empty test set");
    const std::size_t n = testset.size();

    ClassifyRun run;
    run.verdicts.assign(n, Verdict::Unparseable);
    run.statuses.assign(n, TransportStatus::Ok);
    std::vector<std::size_t> attempts(n, 0);
    std::vector<char> resumed(n, 0);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure_ptr;
    std::mutex failure_mu;
    auto worker = [&] {
        try {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                const prompt::ClassifyPrompt p = prompt::build_classify_prompt(testset[i]);
                if (transcripts) {
                    if (const auto prior = transcripts->completed(i); prior && prior->input == p.input) {
                        run.verdicts[i] = prompt::parse_verdict(prior->text);
                        resumed[i] = 1;
                        continue;
                    }
                }
                const CompletionResult r = backend.complete(p.instruction, p.input);
                attempts[i] = r.attempts;
                run.statuses[i] = r.status;
                if (r.status == TransportStatus::Ok) run.verdicts[i] = prompt::parse_verdict(*r.text);
                if (transcripts) {
                    transcripts->append({cfg.run_id, i, p.input, r.status, r.text.value_or(r.detail), r.attempts});
                }
            }
        } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure_ptr) failure_ptr = std::current_exception();
            next.store(n);
        }
    };

    const std::size_t workers = std::min(cfg.max_parallel_requests, n);
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure_ptr) std::rethrow_exception(failure_ptr);

    std::vector<int> truth(n);
    run.predictions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        truth[i] = testset[i].label;
        run.requests += attempts[i];
        run.resumed += resumed[i];
        if (run.statuses[i] != TransportStatus::Ok) {
            ++run.transport_failures;
        } else if (run.verdicts[i] == Verdict::Unparseable) {
            ++run.unparseable_count;
        }
        if (run.verdicts[i] == Verdict::Unparseable) {
            run.predictions[i] = 1 - truth[i];
        } else {
            run.predictions[i] = run.verdicts[i] == Verdict::Malicious ? 1 : 0;
        }
    }
    run.metrics = detection::compute_metrics(run.predictions, truth);
    if (static_cast<double>(run.transport_failures) > cfg.abort_threshold * static_cast<double>(n)) {
        throw GatewayError("classify_with_llm: " + std::to_string(run.transport_failures) + " of " +
                           std::to_string(n) + " requests failed in transport");
    }
    return run;
}

std::string classify_report(const ClassifyRun& run, const GatewayConfig& cfg) {
    auto doc = nlohmann::ordered_json::parse(detection::metrics_report(run.metrics));
    doc["model_name"] = cfg.model_name;
    doc["backend"] = to_string(cfg.backend);
    doc["unparseable_count"] = run.unparseable_count;
    doc["transport_failures"] = run.transport_failures;
    doc["scoring"] = "unparseable and failed records count as wrong predictions";
    return doc.dump(2) + "\n";
}

ExplanationTranscript explain_incident(Backend& backend, const GatewayConfig& cfg, PromptKind kind,
                                       const prompt::Bindings& bindings) {
    ExplanationTranscript t;
    t.kind = kind;
    t.prompt = prompt::build_explain_prompt(kind, bindings);
    t.model_name = cfg.model_name;
    const CompletionResult r = backend.complete(prompt::kClassifyInstruction, t.prompt);
    t.status = r.status;
    t.latency = r.latency;
    t.response = r.text.value_or("");
    if (r.status != TransportStatus::Ok) {
        throw GatewayError("explain_incident: " + std::string(to_string(r.status)) + " (" + r.detail + ")");
    }
    return t;
}

std::vector<ExplanationTranscript> investigate_incident(Backend& backend, const GatewayConfig& cfg,
                                                        const std::string& benign_record,
                                                        const std::string& malicious_record,
                                                        std::string_view malicious_result) {
    std::vector<ExplanationTranscript> out;
    out.push_back(explain_incident(backend, cfg, PromptKind::ExplainReasoning,
                                   {{"input", malicious_record}, {"result", std::string(malicious_result)}}));
    out.push_back(explain_incident(backend, cfg, PromptKind::ExplainFeatureImportance,
                                   {{"input", malicious_record}}));
    out.push_back(explain_incident(backend, cfg, PromptKind::ExplainPairComparison,
                                   {{"input1", benign_record}, {"input2", malicious_record}}));
    return out;
}

std::string render_explanations(std::span<const ExplanationTranscript> transcripts) {
    std::ostringstream out;
    out << "# Incident explanations\n";
    for (const auto& t : transcripts) {
        out << "\n## " << prompt::to_string(t.kind) << "\n\n";
        out << "Model: " << t.model_name << "  \nStatus: " << to_string(t.status) << "\n\n";
        out << "### Prompt\n\n```\n" << t.prompt << "\n```\n\n";
        out << "### Response\n\n```\n" << t.response << "\n```\n";
    }
    return out.str();
}

}  // namespace airshield::llm
