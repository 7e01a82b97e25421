#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "airshield/adversary.hpp"
#include "airshield/record.hpp"

namespace airshield::prompt {

/// Version tag of the record-to-text template below; bump on any wording change.
inline constexpr std::string_view kRecordTemplateVersion = "record-text-v1";

/// Instruction used for every classification request.
inline constexpr std::string_view kClassifyInstruction =
    "Some wireless network state records were compromised by an adversarial attack: values were "
    "changed so that the predicted signal pathloss value was incorrect. Based on the information "
    "provided about numerical features of a wireless signal, give answer if network traffic either "
    "(Benign) or (Malicious) and write your answer in round brackets";

inline constexpr std::string_view kBenignAnswer = "(Benign)";
inline constexpr std::string_view kMaliciousAnswer = "(Malicious)";

/// One sentence per column in record order. Values are printed with two
/// decimals in the display unit (power in picowatts, arrival time in
/// nanoseconds, everything else in its native unit). Lines are joined by '\n'.
std::string serialize_record(const ColumnVector& columns);
std::string serialize_record(const ChannelRecord& record);
std::string serialize_record(const adversary::LabeledSample& sample);

/// Inverse of serialize_record at its two-decimal resolution; nullopt for any
/// text that does not follow the template exactly.
std::optional<ColumnVector> parse_record_text(std::string_view text);

/// parse_record_text(serialize_record(columns)): the values an LLM reading the
/// rendered record actually sees.
ColumnVector textual_view(const ColumnVector& columns);
adversary::LabeledSample textual_view(const adversary::LabeledSample& sample);

struct ClassifyPrompt {
    std::string instruction;
    std::string input;
};

ClassifyPrompt build_classify_prompt(const ColumnVector& columns);
ClassifyPrompt build_classify_prompt(const adversary::LabeledSample& sample);

struct SftExample {
    std::string instruction;
    std::string input;
    std::string output;

    bool operator==(const SftExample&) const = default;
};

std::string_view answer_for(int label);
std::vector<SftExample> build_sft_dataset(std::span<const adversary::LabeledSample> samples);

/// One JSON object per line with keys instruction, input, output in that order.
std::string export_sft_jsonl(std::span<const SftExample> examples);
/// Throws std::invalid_argument on malformed lines or an unknown output.
std::vector<SftExample> import_sft_jsonl(std::string_view text);

enum class Verdict { Benign, Malicious, Unparseable };

std::string_view to_string(Verdict v) noexcept;

/// Case-insensitive search for "(benign)" and "(malicious)". Exactly one kind
/// present gives that verdict; both or neither give Unparseable.
Verdict parse_verdict(std::string_view completion);

enum class PromptKind { Classify, ExplainReasoning, ExplainFeatureImportance, ExplainPairComparison };

std::string_view to_string(PromptKind k) noexcept;
PromptKind parse_prompt_kind(std::string_view name);

/// Template text with {name} placeholders.
std::string_view prompt_template(PromptKind kind);
std::vector<std::string> template_placeholders(PromptKind kind);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Single-pass substitution; a placeholder without a binding throws
/// std::invalid_argument. Bound text is never re-scanned.
std::string render_template(std::string_view text, const Bindings& bindings);
std::string build_explain_prompt(PromptKind kind, const Bindings& bindings);

}  // namespace airshield::prompt
