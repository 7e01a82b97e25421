#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "airshield/io.hpp"
#include "airshield/llm_gateway.hpp"
#include "fixtures.hpp"

using namespace airshield;
using namespace airshield::llm;
using prompt::Verdict;

namespace {

std::string chat_reply(const std::string& content) {
    nlohmann::json doc = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                          {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 2}}}};
    return doc.dump();
}

// Local chat-completions stand-in. Each path exercises one server behaviour.
struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    std::atomic<int> flaky_calls{0};
    std::atomic<int> busy_calls{0};
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};
    std::mutex seen_mu;
    std::string seen_auth;
    std::string seen_body;
    std::set<std::string> busy_bodies;
    std::atomic<int> limited{0};

    StubServer() {
        server.Post("/ok/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(seen_mu);
                seen_auth = req.get_header_value("Authorization");
                seen_body = req.body;
            }
            res.set_content(chat_reply("Looking at the record, (Benign)"), "application/json");
        });
        server.Post("/flaky/chat/completions", [this](const httplib::Request&, httplib::Response& res) {
            if (flaky_calls.fetch_add(1) == 0) {
                res.status = 429;
                return;
            }
            res.set_content(chat_reply("(Malicious)"), "application/json");
        });
        server.Post("/slow/chat/completions", [](const httplib::Request&, httplib::Response& res) {
            std::this_thread::sleep_for(std::chrono::milliseconds(800));
            res.set_content(chat_reply("(Benign)"), "application/json");
        });
        server.Post("/garbled/chat/completions", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"choices\": []", "application/json");
        });
        server.Post("/down/chat/completions", [](const httplib::Request&, httplib::Response& res) {
            res.status = 503;
        });
        server.Post("/forbidden/chat/completions", [](const httplib::Request&, httplib::Response& res) {
            res.status = 403;
        });
        // The first attempt of every third distinct body is rate limited; tracks concurrency.
        server.Post("/busy/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int now = in_flight.fetch_add(1) + 1;
            int prev = max_in_flight.load();
            while (now > prev && !max_in_flight.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            busy_calls.fetch_add(1);
            bool limit = false;
            {
                std::lock_guard lock(seen_mu);
                if (busy_bodies.insert(req.body).second) limit = busy_bodies.size() % 3 == 0;
            }
            if (limit) ++limited;
            in_flight.fetch_sub(1);
            if (limit) {
                res.status = 429;
                return;
            }
            res.set_content(chat_reply("(Malicious)"), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~StubServer() {
        server.stop();
        thread.join();
    }

    GatewayConfig config(const std::string& path) const {
        GatewayConfig cfg;
        cfg.backend = BackendKind::Remote;
        cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/" + path;
        cfg.retry.backoff_base_seconds = 0.001;
        cfg.request_timeout = 5.0;
        return cfg;
    }
};

// Answers every classify request with a fixed completion, or fails in transport
// for the listed record inputs.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(std::string text, TransportStatus fail_status = TransportStatus::Ok,
                             std::size_t fail_every = 0)
        : text_(std::move(text)), fail_status_(fail_status), fail_every_(fail_every) {}

    CompletionResult complete(std::string_view, std::string_view) override {
        const std::size_t k = calls.fetch_add(1);
        CompletionResult r;
        r.attempts = 1;
        if (fail_every_ && k % fail_every_ == 0) {
            r.status = fail_status_;
            r.detail = "scripted failure";
            return r;
        }
        r.status = TransportStatus::Ok;
        r.text = text_;
        return r;
    }

    std::atomic<std::size_t> calls{0};

private:
    std::string text_;
    TransportStatus fail_status_;
    std::size_t fail_every_;
};

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "airshield-gateway-tests";
    std::filesystem::create_directories(dir);
    auto p = dir / name;
    std::filesystem::remove(p);
    return p;
}

}  // namespace

TEST_CASE("gateway: mock backend reproduces the detector on 500 records") {
    const auto& w = fixture::small_world();
    REQUIRE(w.split.test.size() == 500);
    GatewayConfig cfg;
    cfg.max_parallel_requests = 8;
    auto backend = make_backend(cfg, w.detector);
    const ClassifyRun run = classify_with_llm(*backend, cfg, w.split.test);
    CHECK(run.unparseable_count == 0);
    CHECK(run.transport_failures == 0);
    CHECK(run.requests == 500);
    CHECK(run.metrics == pipeline::evaluate_detector(w.detector, w.split.test));

    const ClassifyRun again = classify_with_llm(*backend, cfg, w.split.test);
    CHECK(again.predictions == run.predictions);
}

TEST_CASE("gateway: mock backend without a detector is seeded") {
    const auto& w = fixture::small_world();
    const std::span<const adversary::LabeledSample> head(w.split.test.data(), 50);
    GatewayConfig cfg;
    cfg.mock_seed = 5;
    MockBackend a(5), b(5), c(6);
    const auto ra = classify_with_llm(a, cfg, head);
    CHECK(ra.predictions == classify_with_llm(b, cfg, head).predictions);
    CHECK(ra.unparseable_count == 0);
    CHECK(ra.predictions != classify_with_llm(c, cfg, head).predictions);
}

TEST_CASE("gateway: garbage input gets no verdict") {
    MockBackend mock(1, fixture::small_world().detector);
    const auto r = mock.complete(prompt::kClassifyInstruction, "garbage");
    REQUIRE(r.status == TransportStatus::Ok);
    CHECK(prompt::parse_verdict(*r.text) == Verdict::Unparseable);
    CHECK(prompt::parse_verdict(*mock.complete("other instruction", "x").text) == Verdict::Unparseable);
}

TEST_CASE("gateway: unparseable completions count as wrong") {
    const auto& w = fixture::small_world();
    ScriptedBackend backend("I am not sure.");
    GatewayConfig cfg;
    const auto run = classify_with_llm(backend, cfg, w.split.test);
    CHECK(run.unparseable_count == w.split.test.size());
    CHECK(run.transport_failures == 0);
    CHECK(run.metrics.tp == 0);
    CHECK(run.metrics.tn == 0);
    CHECK(run.metrics.precision == 0.0);
    CHECK(run.metrics.recall == 0.0);
    CHECK(run.metrics.f1 == 0.0);
    const auto report = nlohmann::json::parse(classify_report(run, cfg));
    CHECK(report["unparseable_count"] == w.split.test.size());
}

TEST_CASE("gateway: request body and bearer auth") {
    StubServer stub;
    GatewayConfig cfg = stub.config("ok/");
    cfg.api_key = "sk-test-secret-7";
    cfg.model_name = "test-model";
    RemoteBackend backend(cfg);
    const auto r = backend.complete("instr", "line one\nline two");
    REQUIRE(r.status == TransportStatus::Ok);
    CHECK(*r.text == "Looking at the record, (Benign)");
    CHECK(r.attempts == 1);
    REQUIRE(r.tokens.has_value());
    CHECK(r.tokens->prompt == 10);
    CHECK(stub.seen_auth == "Bearer sk-test-secret-7");
    const auto body = nlohmann::json::parse(stub.seen_body);
    CHECK(body["model"] == "test-model");
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][0]["content"] == "instr");
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["messages"][1]["content"] == "line one\nline two");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["max_tokens"] == 2048);
    CHECK(stub.seen_body == build_request_body(cfg, "instr", "line one\nline two"));
}

TEST_CASE("gateway: rate limit is retried once") {
    StubServer stub;
    RemoteBackend backend(stub.config("flaky"));
    const auto r = backend.complete("i", "x");
    CHECK(r.status == TransportStatus::Ok);
    CHECK(r.attempts == 2);
    CHECK(stub.flaky_calls == 2);
    CHECK(prompt::parse_verdict(*r.text) == Verdict::Malicious);
}

TEST_CASE("gateway: transport failures") {
    StubServer stub;
    GatewayConfig slow = stub.config("slow");
    slow.request_timeout = 0.2;
    slow.retry.max_retries = 0;
    const auto t = RemoteBackend(slow).complete("i", "x");
    CHECK(t.status == TransportStatus::Timeout);
    CHECK_FALSE(t.text.has_value());

    const auto m = RemoteBackend(stub.config("garbled")).complete("i", "x");
    CHECK(m.status == TransportStatus::Malformed);
    CHECK(m.attempts == 1);

    GatewayConfig down = stub.config("down");
    down.retry.max_retries = 2;
    const auto d = RemoteBackend(down).complete("i", "x");
    CHECK(d.status == TransportStatus::ServerError);
    CHECK(d.attempts == 3);

    const auto f = RemoteBackend(stub.config("forbidden")).complete("i", "x");
    CHECK(f.status == TransportStatus::ServerError);
    CHECK(f.attempts == 1);

    GatewayConfig nowhere;
    nowhere.backend = BackendKind::Remote;
    nowhere.endpoint_url = "http://127.0.0.1:1";
    nowhere.retry.max_retries = 0;
    CHECK(RemoteBackend(nowhere).complete("i", "x").status != TransportStatus::Ok);
}

TEST_CASE("gateway: response parsing") {
    CHECK(parse_response_body(chat_reply("hi")).text == "hi");
    CHECK(parse_response_body("[]").status == TransportStatus::Malformed);
    CHECK(parse_response_body("{\"choices\":[{\"message\":{}}]}").status == TransportStatus::Malformed);
    CHECK(parse_response_body("{\"choices\":[{\"message\":{\"content\":3}}]}").status ==
          TransportStatus::Malformed);
    CHECK_FALSE(parse_response_body("{\"choices\":[{\"message\":{\"content\":\"a\"}}]}").tokens.has_value());
}

TEST_CASE("gateway: bounded parallelism and request accounting") {
    const auto& w = fixture::small_world();
    const std::span<const adversary::LabeledSample> rows(w.split.test.data(), 60);
    StubServer stub;
    GatewayConfig cfg = stub.config("busy");
    cfg.max_parallel_requests = 3;
    RemoteBackend backend(cfg);
    const auto run = classify_with_llm(backend, cfg, rows);
    CHECK(stub.max_in_flight.load() <= 3);
    CHECK(stub.max_in_flight.load() >= 1);
    CHECK(run.transport_failures == 0);
    CHECK(run.requests == static_cast<std::size_t>(stub.busy_calls.load()));
    CHECK(run.requests == rows.size() + static_cast<std::size_t>(stub.limited.load()));
    CHECK(stub.limited.load() == 20);
    for (auto v : run.verdicts) CHECK(v == Verdict::Malicious);
}

TEST_CASE("gateway: abort threshold") {
    const auto& w = fixture::small_world();
    const std::span<const adversary::LabeledSample> rows(w.split.test.data(), 100);
    GatewayConfig cfg;
    cfg.abort_threshold = 0.2;
    ScriptedBackend mostly_down("(Benign)", TransportStatus::Timeout, 2);
    CHECK_THROWS_AS(classify_with_llm(mostly_down, cfg, rows), GatewayError);

    ScriptedBackend sometimes_down("(Benign)", TransportStatus::ServerError, 10);
    const auto run = classify_with_llm(sometimes_down, cfg, rows);
    CHECK(run.transport_failures == 10);
    CHECK(run.unparseable_count == 0);
    std::size_t failed = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (run.statuses[i] != TransportStatus::Ok) {
            ++failed;
            CHECK(run.predictions[i] != rows[i].label);
        }
    }
    CHECK(failed == 10);
}

TEST_CASE("gateway: transcripts resume and never hold the key") {
    const auto& w = fixture::small_world();
    const std::span<const adversary::LabeledSample> rows(w.split.test.data(), 40);
    const auto file = scratch("resume.jsonl");
    GatewayConfig cfg;
    cfg.api_key = "sk-live-do-not-log-42";
    cfg.run_id = "r1";
    MockBackend mock(3, w.detector);

    ClassifyRun first;
    {
        TranscriptStore store(file, cfg.run_id);
        first = classify_with_llm(mock, cfg, rows, &store);
    }
    CHECK(first.resumed == 0);
    const std::string log = io::read_file(file);
    CHECK(log.find(cfg.api_key) == std::string::npos);
    CHECK(cfg.describe().find(cfg.api_key) == std::string::npos);
    CHECK(nlohmann::json::parse(cfg.describe())["api_key"] == "set");

    // Keep half the lines plus a torn one, as after a crash.
    std::string partial;
    std::size_t pos = 0;
    for (int k = 0; k < 20; ++k) {
        const auto eol = log.find('\n', pos);
        partial += log.substr(pos, eol - pos + 1);
        pos = eol + 1;
    }
    partial += "{\"run_id\":\"r1\",\"record_in";
    io::write_file(file, partial);

    ScriptedBackend counting("(Benign)");
    TranscriptStore store(file, cfg.run_id);
    const auto second = classify_with_llm(counting, cfg, rows, &store);
    CHECK(second.resumed == 20);
    CHECK(counting.calls == 20);
    CHECK(second.requests == 20);

    TranscriptStore other_run(file, "r2");
    CHECK_FALSE(other_run.completed(0).has_value());

    ScriptedBackend unused("(Benign)");
    TranscriptStore full(file, cfg.run_id);
    const auto third = classify_with_llm(unused, cfg, rows, &full);
    CHECK(third.resumed == rows.size());
    CHECK(unused.calls == 0);
    CHECK(io::read_file(file).find(cfg.api_key) == std::string::npos);
}

TEST_CASE("gateway: explanations come in a fixed order") {
    const auto& w = fixture::small_world();
    GatewayConfig cfg;
    MockBackend mock(1, w.detector);
    const std::string benign = prompt::serialize_record(w.split.test[0]);
    const std::string malicious = prompt::serialize_record(w.split.test[1]);
    const auto t = investigate_incident(mock, cfg, benign, malicious, "(Malicious)");
    REQUIRE(t.size() == 3);
    CHECK(t[0].kind == prompt::PromptKind::ExplainReasoning);
    CHECK(t[1].kind == prompt::PromptKind::ExplainFeatureImportance);
    CHECK(t[2].kind == prompt::PromptKind::ExplainPairComparison);
    for (const auto& e : t) {
        CHECK(e.status == TransportStatus::Ok);
        CHECK_FALSE(e.response.empty());
        CHECK(e.response != kMockRefusal);
    }
    CHECK(t[2].prompt.find(benign) != std::string::npos);
    const std::string md = render_explanations(t);
    const auto a = md.find("## explain_reasoning");
    const auto b = md.find("## explain_feature_importance");
    const auto c = md.find("## explain_pair_comparison");
    CHECK(a < b);
    CHECK(b < c);
    CHECK(c != std::string::npos);

    ScriptedBackend down("x", TransportStatus::Timeout, 1);
    CHECK_THROWS_AS(investigate_incident(down, cfg, benign, malicious, "(Malicious)"), GatewayError);
}

TEST_CASE("gateway: config validation") {
    GatewayConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.backend = BackendKind::Remote;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.endpoint_url = "127.0.0.1:8000";
    CHECK_THROWS_AS(RemoteBackend{cfg}, std::invalid_argument);
    GatewayConfig p;
    p.max_parallel_requests = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.abort_threshold = 1.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK(parse_backend_kind("mock") == BackendKind::Mock);
    CHECK_THROWS_AS(parse_backend_kind("openai"), std::invalid_argument);
    CHECK(parse_transport_status("rate_limited") == TransportStatus::RateLimited);
}
