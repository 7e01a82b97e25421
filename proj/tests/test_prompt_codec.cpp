#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "airshield/emulator.hpp"
#include "airshield/io.hpp"
#include "airshield/prompt_codec.hpp"
#include "airshield/rng.hpp"
#include "golden_prompt.hpp"

using namespace airshield;
using namespace airshield::prompt;
using golden::blocked_record;
using golden::clear_record;
using golden::perturbed_sample;
using golden::render_golden;

namespace {

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("codec: classify prompt golden file") {
    const std::string path = std::string(AIRSHIELD_GOLDEN_DIR) + "/classify_prompt.txt";
    const std::string rendered = render_golden();
    if (std::getenv("AIRSHIELD_WRITE_GOLDEN")) io::write_file(path, rendered);
    CHECK(rendered == io::read_file(path));
    CHECK(render_golden() == rendered);
}

TEST_CASE("codec: instruction is the fixed prompt") {
    const auto p = build_classify_prompt(to_columns(clear_record()));
    CHECK(p.instruction.ends_with("write your answer in round brackets"));
    CHECK(p.instruction.starts_with("Some wireless network state records were compromised"));
    CHECK(build_classify_prompt(to_columns(blocked_record())).instruction == p.instruction);
    CHECK(p.input == serialize_record(clear_record()));
}

TEST_CASE("codec: record rendering") {
    const std::string text = serialize_record(clear_record());
    const auto lines = lines_of(text);
    REQUIRE(lines.size() == kColumnCount);
    CHECK(text.back() != '\n');
    CHECK(lines[0] == "The X coordinate of the end user is -120.00 meters.");
    CHECK(lines[3] == "The combined path loss between sender and receiver is 103.41 decibels.");
    CHECK(lines[9] == "The power of the signal at the receiver is 0.05 picowatts.");
    CHECK(lines[10] == "The signal arrival time is 421.23 nanoseconds.");
    CHECK(lines[11] == "The line of sight status between the base station and the user is 1.00.");

    const auto blocked = lines_of(serialize_record(blocked_record()));
    CHECK(blocked[9] == "The power of the signal at the receiver is 0.00 picowatts.");
    CHECK(blocked[11] == "The line of sight status between the base station and the user is -1.00.");

    const auto perturbed = lines_of(serialize_record(perturbed_sample()));
    CHECK(perturbed[9] == "The power of the signal at the receiver is 0.00 picowatts.");
    CHECK(perturbed[11] == "The line of sight status between the base station and the user is 0.00.");

    CHECK_THROWS_AS(serialize_record(ColumnVector{std::nan("")}), std::invalid_argument);
}

TEST_CASE("codec: changing one feature changes exactly one line") {
    const ColumnVector base = to_columns(clear_record());
    const auto ref = lines_of(serialize_record(base));
    for (std::size_t i = 0; i < kColumnCount; ++i) {
        ColumnVector c = base;
        c[i] += i == 9 ? 1e-12 : (i == 10 ? 1e-9 : 1.0);
        const auto changed = lines_of(serialize_record(c));
        std::size_t diff = 0;
        for (std::size_t k = 0; k < kColumnCount; ++k) diff += changed[k] != ref[k];
        CHECK(diff == 1);
        CHECK(changed[i] != ref[i]);
    }
    CHECK(serialize_record(clear_record()) == serialize_record(clear_record()));
}

TEST_CASE("codec: parse_record_text inverts the rendering at two decimals") {
    Rng rng(1);
    for (int k = 0; k < 500; ++k) {
        ColumnVector c;
        for (double& v : c) v = rng.uniform(-500, 500);
        c[9] = rng.uniform(0, 1e-10);
        c[10] = rng.uniform(0, 2e-6);
        const auto text = serialize_record(c);
        const auto parsed = parse_record_text(text);
        REQUIRE(parsed.has_value());
        CHECK(serialize_record(*parsed) == text);
        CHECK(textual_view(*parsed) == *parsed);
        for (std::size_t i = 0; i < kColumnCount; ++i) {
            const double scale = i == 9 ? 1e12 : (i == 10 ? 1e9 : 1.0);
            CHECK(std::abs((*parsed)[i] - c[i]) * scale <= 0.005 + 1e-9);
        }
    }
    CHECK_FALSE(parse_record_text("hello").has_value());
    CHECK_FALSE(parse_record_text("").has_value());
    std::string text = serialize_record(clear_record());
    CHECK_FALSE(parse_record_text(text + "\n").has_value());
    text.replace(text.find("103.41"), 6, "abc");
    CHECK_FALSE(parse_record_text(text).has_value());
}

TEST_CASE("codec: SFT examples and the verdict round trip") {
    Rng rng(2);
    std::vector<adversary::LabeledSample> samples;
    for (int k = 0; k < 1000; ++k) {
        adversary::LabeledSample s;
        s.x.resize(kFeatureCount);
        for (double& v : s.x) v = rng.uniform(-100, 100);
        s.y = rng.uniform(60, 250);
        s.label = static_cast<int>(rng.below(2));
        s.source_index = static_cast<std::size_t>(k);
        samples.push_back(s);
    }
    const auto sft = build_sft_dataset(samples);
    REQUIRE(sft.size() == samples.size());
    for (std::size_t k = 0; k < sft.size(); ++k) {
        const Verdict v = parse_verdict(sft[k].output);
        CHECK(v == (samples[k].label ? Verdict::Malicious : Verdict::Benign));
        CHECK(sft[k].input == serialize_record(samples[k]));
        CHECK(sft[k].instruction == kClassifyInstruction);
    }
    const std::string jsonl = export_sft_jsonl(sft);
    CHECK(import_sft_jsonl(jsonl) == sft);
    CHECK(export_sft_jsonl(import_sft_jsonl(jsonl)) == jsonl);
    const auto first = jsonl.substr(0, jsonl.find('\n'));
    CHECK(first.starts_with("{\"instruction\":"));
    CHECK(first.find(",\"input\":") < first.find(",\"output\":"));
}

TEST_CASE("codec: balanced input gives balanced outputs") {
    std::vector<adversary::LabeledSample> samples(10);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        samples[k].x.assign(kFeatureCount, 1.0);
        samples[k].label = static_cast<int>(k % 2);
    }
    std::size_t benign = 0;
    for (const auto& e : build_sft_dataset(samples)) benign += e.output == kBenignAnswer;
    CHECK(benign == 5);
    for (auto& s : samples) s.label = 0;
    for (const auto& e : build_sft_dataset(samples)) CHECK(e.output == "(Benign)");
    samples[0].label = 3;
    CHECK_THROWS_AS(build_sft_dataset(samples), std::invalid_argument);
}

TEST_CASE("codec: import rejects malformed lines") {
    CHECK_THROWS_AS(import_sft_jsonl("{\"instruction\":\"a\",\"input\":\"b\",\"output\":\"maybe\"}\n"),
                    std::invalid_argument);
    CHECK_THROWS_AS(import_sft_jsonl("not json\n"), std::invalid_argument);
    CHECK_THROWS_AS(import_sft_jsonl("{\"instruction\":\"a\",\"input\":\"b\"}\n"), std::invalid_argument);
}

TEST_CASE("codec: parse_verdict") {
    CHECK(parse_verdict("after careful thought, therefore (Malicious)") == Verdict::Malicious);
    CHECK(parse_verdict("(BENIGN)") == Verdict::Benign);
    CHECK(parse_verdict("(benign)") == Verdict::Benign);
    CHECK(parse_verdict("could be (Benign) or (Malicious)") == Verdict::Unparseable);
    CHECK(parse_verdict("benign") == Verdict::Unparseable);
    CHECK(parse_verdict("") == Verdict::Unparseable);
    CHECK(parse_verdict("Malicious traffic") == Verdict::Unparseable);
}

TEST_CASE("codec: explain prompts") {
    const std::string a = serialize_record(clear_record());
    const std::string b = serialize_record(blocked_record());
    const std::string reasoning =
        build_explain_prompt(PromptKind::ExplainReasoning, {{"input", a}, {"result", "(Malicious)"}});
    CHECK(reasoning.find("chain of thoughts") != std::string::npos);
    CHECK(reasoning.starts_with("Based on " + a + " info you predicted (Malicious)."));

    const std::string pair = build_explain_prompt(PromptKind::ExplainPairComparison, {{"input1", a}, {"input2", b}});
    CHECK(pair.find(a) != std::string::npos);
    CHECK(pair.find(b) != std::string::npos);
    CHECK(pair.find("{input1}") == std::string::npos);
    CHECK(pair.find("{input2}") == std::string::npos);

    const std::string feat = build_explain_prompt(PromptKind::ExplainFeatureImportance, {{"input", b}});
    CHECK(feat == "What is the most important numerical feature of " + b + " in determining malicious intent?");

    CHECK_THROWS_AS(build_explain_prompt(PromptKind::ExplainReasoning, {{"input", a}}), std::invalid_argument);
    CHECK_THROWS_AS(build_explain_prompt(PromptKind::Classify, {}), std::invalid_argument);
    CHECK_THROWS_AS(parse_prompt_kind("explain_everything"), std::invalid_argument);
    CHECK(parse_prompt_kind("explain_pair_comparison") == PromptKind::ExplainPairComparison);
}

TEST_CASE("codec: bound text is not re-scanned") {
    CHECK(render_template("x {a} y", {{"a", "{b}"}}) == "x {b} y");
    CHECK_THROWS_AS(render_template("x {a", {{"a", "1"}}), std::invalid_argument);
    for (auto kind : {PromptKind::ExplainReasoning, PromptKind::ExplainFeatureImportance,
                      PromptKind::ExplainPairComparison}) {
        Bindings b;
        for (const auto& name : template_placeholders(kind)) b[name] = "<" + name + ">";
        const std::string out = build_explain_prompt(kind, b);
        for (const auto& name : template_placeholders(kind)) CHECK(out.find("<" + name + ">") != std::string::npos);
    }
}

TEST_CASE("codec: textual view of a labeled sample") {
    const auto s = perturbed_sample();
    const auto v = textual_view(s);
    CHECK(v.label == s.label);
    CHECK(v.source_index == s.source_index);
    CHECK(v.x[10] == 0.0);
    CHECK(v.x[0] == -120.0);
    CHECK(v.y == 103.41);
    CHECK(serialize_record(v) == serialize_record(s));
}
