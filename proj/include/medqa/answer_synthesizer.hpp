#pragma once

#include "medqa/chat_provider.hpp"
#include "medqa/pubmed_client.hpp"
#include "medqa/query_builder.hpp"

#include <nlohmann/json_fwd.hpp>

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace medqa {

inline constexpr std::size_t kMaxPromptDocuments = 20;
inline constexpr int kSynthesisRetries = 2;

struct CitedBullet {
    std::string text;       // reference groups removed
    std::vector<int> refs;  // ascending, unique, as written (may include out-of-range)

    bool operator==(const CitedBullet&) const = default;
};

struct AnswerSection {
    std::string heading;
    std::vector<CitedBullet> bullets;

    bool operator==(const AnswerSection&) const = default;
};

struct SynthesizedAnswer {
    std::string lead;
    std::vector<AnswerSection> sections;
    std::set<int> cited_indices;  // within 1..n
    std::vector<int> violations;  // references outside 1..n
    int study_count = 0;
    double coverage = 0.0;
    std::vector<std::string> warnings;
};

struct CompletenessReport {
    double coverage = 0.0;
    std::vector<int> uncited;
    std::vector<int> violations;
};

void to_json(nlohmann::json& j, const SynthesizedAnswer& a);
void to_json(nlohmann::json& j, const CompletenessReport& r);

struct PromptParts {
    std::string system;  // instruction asset
    std::string user;    // question + numbered documents
};

PromptParts build_prompt_parts(const HealthQuestion& question, const std::vector<StudyRecord>& docs);

// system + blank line + user; what the model sees, as one string.
std::string build_prompt(const HealthQuestion& question, const std::vector<StudyRecord>& docs);

// Reference numbers in text: "[3]", "[1, 4]", "[2-5]", "([1], [4])".
std::vector<int> extract_references(std::string_view text);
std::string strip_references(std::string_view text);

/// Lead = first prose line before any heading; "#" lines open sections;
/// "- " lines are bullets; other prose continues the previous bullet.
/// Throws MalformedAnswer without a lead, a section or any bullet.
SynthesizedAnswer parse_answer(std::string_view raw, int n);

// Canonical markdown: references re-attached before the final punctuation.
std::string render_answer(const SynthesizedAnswer& answer);

CompletenessReport validate_and_report(const SynthesizedAnswer& answer, int n);

// Up to kSynthesisRetries regenerations with a format reminder, then
// SynthesisFailed. `attempts` (when given) receives the number of calls.
SynthesizedAnswer synthesize_answer(const HealthQuestion& question,
                                    const std::vector<StudyRecord>& docs, ChatProvider& llm,
                                    int* attempts = nullptr);

}  // namespace medqa
