#include "airshield/prompt_codec.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "airshield/format.hpp"

namespace airshield::prompt {
namespace {

struct LineTemplate {
    std::string_view prefix;
    std::string_view suffix;
    double display_scale;  // display value = SI value * scale
};

// Column order matches kColumnNames.
constexpr std::array<LineTemplate, kColumnCount> kLines = {{
    {"The X coordinate of the end user is ", " meters.", 1.0},
    {"The Y coordinate of the end user is ", " meters.", 1.0},
    {"The distance between the base station and the user is ", " meters.", 1.0},
    {"The combined path loss between sender and receiver is ", " decibels.", 1.0},
    {"The azimuth angle of signal arrival is ", " degrees.", 1.0},
    {"The zenith angle of signal arrival is ", " degrees.", 1.0},
    {"The azimuth angle of signal departure is ", " degrees.", 1.0},
    {"The zenith angle of signal departure is ", " degrees.", 1.0},
    {"The phase of the signal path is ", " degrees.", 1.0},
    {"The power of the signal at the receiver is ", " picowatts.", 1e12},
    {"The signal arrival time is ", " nanoseconds.", 1e9},
    {"The line of sight status between the base station and the user is ", ".", 1.0},
}};

constexpr std::string_view kReasoningTemplate =
    "Based on {input} info you predicted {result}. Please write your chain of thoughts and "
    "reasoning for such an answer.";
constexpr std::string_view kFeatureImportanceTemplate =
    "What is the most important numerical feature of {input} in determining malicious intent?";
constexpr std::string_view kPairComparisonTemplate =
    "Here is an example of a row of (Benign) traffic data {input1} and here is an example of a row "
    "of (Malicious) traffic data {input2}. Analyze both examples and write your thoughts on how "
    "adversarial attack affected data.";

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::string serialize_record(const ColumnVector& columns) {
    std::string out;
    for (std::size_t i = 0; i < kColumnCount; ++i) {
        const double shown = columns[i] * kLines[i].display_scale;
        if (!std::isfinite(shown)) {
            throw std::invalid_argument("serialize_record: non-finite value in column " +
                                        std::string(kColumnNames[i]));
        }
        if (i > 0) out += '\n';
        out += kLines[i].prefix;
        out += format_fixed(shown, 2);
        out += kLines[i].suffix;
    }
    return out;
}

std::string serialize_record(const ChannelRecord& record) { return serialize_record(to_columns(record)); }

std::string serialize_record(const adversary::LabeledSample& sample) {
    return serialize_record(join_columns(sample.x, sample.y));
}

std::optional<ColumnVector> parse_record_text(std::string_view text) {
    ColumnVector out{};
    std::size_t pos = 0;
    for (std::size_t i = 0; i < kColumnCount; ++i) {
        const std::size_t eol = text.find('\n', pos);
        const std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
        if ((eol == std::string_view::npos) != (i + 1 == kColumnCount)) return std::nullopt;
        const LineTemplate& t = kLines[i];
        if (line.size() <= t.prefix.size() + t.suffix.size() || !line.starts_with(t.prefix) ||
            !line.ends_with(t.suffix)) {
            return std::nullopt;
        }
        const std::string_view number =
            line.substr(t.prefix.size(), line.size() - t.prefix.size() - t.suffix.size());
        try {
            out[i] = parse_double(number) / t.display_scale;
        } catch (const std::invalid_argument&) {
            return std::nullopt;
        }
        pos = eol + 1;
    }
    return out;
}

ColumnVector textual_view(const ColumnVector& columns) {
    // The template always parses its own output.
    return *parse_record_text(serialize_record(columns));
}

adversary::LabeledSample textual_view(const adversary::LabeledSample& sample) {
    const ColumnVector c = textual_view(join_columns(sample.x, sample.y));
    adversary::LabeledSample out = sample;
    std::size_t k = 0;
    for (std::size_t i = 0; i < kColumnCount; ++i) {
        if (i == kPathlossColumn) out.y = c[i];
        else out.x[k++] = c[i];
    }
    return out;
}

ClassifyPrompt build_classify_prompt(const ColumnVector& columns) {
    return {std::string(kClassifyInstruction), serialize_record(columns)};
}

ClassifyPrompt build_classify_prompt(const adversary::LabeledSample& sample) {
    return build_classify_prompt(join_columns(sample.x, sample.y));
}

std::string_view answer_for(int label) {
    if (label == adversary::kBenign) return kBenignAnswer;
    if (label == adversary::kMalicious) return kMaliciousAnswer;
    throw std::invalid_argument("label must be 0 or 1");
}

std::vector<SftExample> build_sft_dataset(std::span<const adversary::LabeledSample> samples) {
    std::vector<SftExample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        const std::string_view answer = answer_for(s.label);
        ClassifyPrompt p = build_classify_prompt(s);
        out.push_back({std::move(p.instruction), std::move(p.input), std::string(answer)});
    }
    return out;
}

std::string export_sft_jsonl(std::span<const SftExample> examples) {
    std::string out;
    for (const auto& e : examples) {
        nlohmann::ordered_json line;
        line["instruction"] = e.instruction;
        line["input"] = e.input;
        line["output"] = e.output;
        out += line.dump();
        out += '\n';
    }
    return out;
}

std::vector<SftExample> import_sft_jsonl(std::string_view text) {
    std::vector<SftExample> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        const std::size_t eol = text.find('\n', pos);
        const std::string_view line = text.substr(pos, eol == text.npos ? text.npos : eol - pos);
        pos = eol == text.npos ? text.size() : eol + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto obj = nlohmann::json::parse(line);
            if (!obj.is_object() || obj.size() != 3) throw std::invalid_argument("expected 3 keys");
            SftExample e{obj.at("instruction").get<std::string>(), obj.at("input").get<std::string>(),
                         obj.at("output").get<std::string>()};
            if (e.output != kBenignAnswer && e.output != kMaliciousAnswer) {
                throw std::invalid_argument("output must be (Benign) or (Malicious)");
            }
            out.push_back(std::move(e));
        } catch (const std::exception& ex) {
            throw std::invalid_argument("sft line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::Benign: return "Benign";
        case Verdict::Malicious: return "Malicious";
        case Verdict::Unparseable: return "Unparseable";
    }
    return "Unparseable";
}

Verdict parse_verdict(std::string_view completion) {
    const std::string folded = lowercase(completion);
    const bool benign = folded.find("(benign)") != std::string::npos;
    const bool malicious = folded.find("(malicious)") != std::string::npos;
    if (benign == malicious) return Verdict::Unparseable;
    return benign ? Verdict::Benign : Verdict::Malicious;
}

std::string_view to_string(PromptKind k) noexcept {
    switch (k) {
        case PromptKind::Classify: return "classify";
        case PromptKind::ExplainReasoning: return "explain_reasoning";
        case PromptKind::ExplainFeatureImportance: return "explain_feature_importance";
        case PromptKind::ExplainPairComparison: return "explain_pair_comparison";
    }
    return "classify";
}

PromptKind parse_prompt_kind(std::string_view name) {
    for (PromptKind k : {PromptKind::Classify, PromptKind::ExplainReasoning,
                         PromptKind::ExplainFeatureImportance, PromptKind::ExplainPairComparison}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown prompt kind: " + std::string(name));
}

std::string_view prompt_template(PromptKind kind) {
    switch (kind) {
        case PromptKind::Classify: return kClassifyInstruction;
        case PromptKind::ExplainReasoning: return kReasoningTemplate;
        case PromptKind::ExplainFeatureImportance: return kFeatureImportanceTemplate;
        case PromptKind::ExplainPairComparison: return kPairComparisonTemplate;
    }
    throw std::invalid_argument("unknown prompt kind");
}

std::vector<std::string> template_placeholders(PromptKind kind) {
    switch (kind) {
        case PromptKind::Classify: return {};
        case PromptKind::ExplainReasoning: return {"input", "result"};
        case PromptKind::ExplainFeatureImportance: return {"input"};
        case PromptKind::ExplainPairComparison: return {"input1", "input2"};
    }
    throw std::invalid_argument("unknown prompt kind");
}

std::string render_template(std::string_view text, const Bindings& bindings) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find('{', pos);
        if (open == text.npos) {
            out += text.substr(pos);
            break;
        }
        const std::size_t close = text.find('}', open);
        if (close == text.npos) throw std::invalid_argument("template: unterminated placeholder");
        out += text.substr(pos, open - pos);
        const std::string_view name = text.substr(open + 1, close - open - 1);
        const auto it = bindings.find(name);
        if (it == bindings.end()) {
            throw std::invalid_argument("template: missing binding for {" + std::string(name) + "}");
        }
        out += it->second;
        pos = close + 1;
    }
    return out;
}

std::string build_explain_prompt(PromptKind kind, const Bindings& bindings) {
    if (kind == PromptKind::Classify) {
        throw std::invalid_argument("classify is not an explainability prompt");
    }
    return render_template(prompt_template(kind), bindings);
}

}  // namespace airshield::prompt
