#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "airshield/adversary.hpp"
#include "airshield/detector.hpp"
#include "airshield/prompt_codec.hpp"

namespace airshield::llm {

inline constexpr std::string_view kApiKeyEnv = "AIRSHIELD_API_KEY";

enum class BackendKind { Remote, Mock };

std::string_view to_string(BackendKind k) noexcept;
BackendKind parse_backend_kind(std::string_view name);

struct RetryPolicy {
    std::size_t max_retries = 3;
    double backoff_base_seconds = 0.5;
};

struct GatewayConfig {
    BackendKind backend = BackendKind::Mock;
    std::string endpoint_url;  // e.g. https://host/v1; requests go to {endpoint_url}/chat/completions
    std::string api_key;       // read from the environment, never serialized
    std::string model_name = "unsloth/gemma-7b";
    std::size_t max_output_tokens = 2048;
    double temperature = 0.0;
    double request_timeout = 60.0;  // s
    std::size_t max_parallel_requests = 4;
    RetryPolicy retry;
    double abort_threshold = 0.5;  // fraction of records allowed to fail in transport
    std::uint64_t mock_seed = 0;
    std::string run_id = "run";

    void validate() const;
    /// Config snapshot without the api key.
    std::string describe() const;
};

/// Value of AIRSHIELD_API_KEY, empty when unset.
std::string api_key_from_env();

enum class TransportStatus { Ok, Timeout, RateLimited, ServerError, Malformed };

std::string_view to_string(TransportStatus s) noexcept;
TransportStatus parse_transport_status(std::string_view name);

struct TokenCounts {
    std::size_t prompt = 0;
    std::size_t completion = 0;
};

/// text is present iff status == Ok.
struct CompletionResult {
    TransportStatus status = TransportStatus::Malformed;
    std::optional<std::string> text;
    double latency = 0.0;  // s
    std::optional<TokenCounts> tokens;
    std::size_t attempts = 0;
    std::string detail;  // diagnostic for failures
};

class Backend {
public:
    virtual ~Backend() = default;
    /// System message = instruction, user message = input.
    virtual CompletionResult complete(std::string_view instruction, std::string_view input) = 0;
};

/// Chat-completions client: POST {endpoint_url}/chat/completions with bearer
/// auth; retries rate-limited and server errors with exponential backoff.
class RemoteBackend final : public Backend {
public:
    explicit RemoteBackend(GatewayConfig cfg);
    CompletionResult complete(std::string_view instruction, std::string_view input) override;

private:
    GatewayConfig cfg_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;    // base path + /chat/completions
};

/// Offline backend. Classification requests are answered by the detector when
/// one is attached (otherwise by a seeded hash of the input); inputs that are
/// not rendered records get a refusal without a verdict. Explainability
/// prompts get canned text. Latency is reported as 0.
class MockBackend final : public Backend {
public:
    explicit MockBackend(std::uint64_t seed, std::optional<detection::DetectorModel> detector = std::nullopt);
    CompletionResult complete(std::string_view instruction, std::string_view input) override;

private:
    std::uint64_t seed_;
    std::optional<detection::DetectorModel> detector_;
};

inline constexpr std::string_view kMockRefusal =
    "I cannot assess this request: the input is not a wireless signal record.";

std::unique_ptr<Backend> make_backend(const GatewayConfig& cfg,
                                      std::optional<detection::DetectorModel> detector = std::nullopt);

std::string build_request_body(const GatewayConfig& cfg, std::string_view instruction,
                               std::string_view input);
/// Ok with text, or Malformed when the first choice's message content is missing.
CompletionResult parse_response_body(std::string_view body);

/// Append-only JSONL log of per-record completions keyed by (run_id, record_index).
class TranscriptStore {
public:
    struct Entry {
        std::string run_id;
        std::size_t record_index = 0;
        std::string input;
        TransportStatus status = TransportStatus::Ok;
        std::string text;
        std::size_t attempts = 0;
    };

    TranscriptStore(std::filesystem::path file, std::string run_id);
    /// Completed (status ok) entry for the record, if the file already has one.
    std::optional<Entry> completed(std::size_t record_index) const;
    void append(const Entry& e);

private:
    std::filesystem::path file_;
    std::string run_id_;
    std::map<std::size_t, Entry> done_;
    bool torn_tail_ = false;  // file ends without a newline
    mutable std::mutex mu_;
};

class GatewayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ClassifyRun {
    std::vector<prompt::Verdict> verdicts;   // Unparseable also for transport failures
    std::vector<TransportStatus> statuses;
    std::vector<int> predictions;            // failures scored as the wrong class
    std::size_t unparseable_count = 0;
    std::size_t transport_failures = 0;
    std::size_t requests = 0;                // attempts issued in this call, retries included
    std::size_t resumed = 0;                 // records answered from the transcript
    detection::Metrics metrics;
};

/// One classify prompt per record, at most cfg.max_parallel_requests in flight.
/// Throws GatewayError when transport failures exceed cfg.abort_threshold.
ClassifyRun classify_with_llm(Backend& backend, const GatewayConfig& cfg,
                              std::span<const adversary::LabeledSample> testset,
                              TranscriptStore* transcripts = nullptr);

std::string classify_report(const ClassifyRun& run, const GatewayConfig& cfg);

struct ExplanationTranscript {
    prompt::PromptKind kind = prompt::PromptKind::ExplainReasoning;
    std::string prompt;
    std::string response;
    TransportStatus status = TransportStatus::Ok;
    double latency = 0.0;
    std::string model_name;
};

ExplanationTranscript explain_incident(Backend& backend, const GatewayConfig& cfg,
                                       prompt::PromptKind kind, const prompt::Bindings& bindings);

/// The three explainability prompts over one incident, in fixed order:
/// reasoning, feature importance, pair comparison.
std::vector<ExplanationTranscript> investigate_incident(Backend& backend, const GatewayConfig& cfg,
                                                        const std::string& benign_record,
                                                        const std::string& malicious_record,
                                                        std::string_view malicious_result);

std::string render_explanations(std::span<const ExplanationTranscript> transcripts);

}  // namespace airshield::llm
