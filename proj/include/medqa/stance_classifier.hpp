#pragma once

#include "medqa/chat_provider.hpp"
#include "medqa/pubmed_client.hpp"
#include "medqa/query_builder.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <string_view>

namespace medqa {

enum class StanceLabel { Supported, Refuted, Neutral };

std::string_view to_string(StanceLabel label);

struct StanceWeights {
    double support = 0.0;
    double refute = 0.0;
    double neutral = 0.0;

    double sum() const { return support + refute + neutral; }
    bool operator==(const StanceWeights&) const = default;
};

// Argmax; ties resolve supported > refuted > neutral.
StanceLabel dominant_of(const StanceWeights& w);

// Scales non-negative weights to sum 1. All-zero input is UnparseableResponse.
StanceWeights normalize(const StanceWeights& w);

struct ParsedStance {
    StanceWeights weights;  // normalized
    std::string rationale;
};

/// Takes the first JSON object embedded in a model reply (prose around it is
/// ignored). Requires numeric, non-negative support/refute/neutral.
ParsedStance parse_stance_response(std::string_view raw);

inline constexpr int kStanceReprompts = 2;
inline constexpr std::string_view kUnclassifiable = "unclassifiable";

struct StanceAssessment {
    std::string pmid;
    StanceWeights weights;
    StanceLabel dominant = StanceLabel::Neutral;
    std::string rationale;
    bool unclassifiable = false;

    bool operator==(const StanceAssessment&) const = default;
};

void to_json(nlohmann::json& j, const StanceAssessment& a);

// Neutral (0, 0, 1) flagged assessment used when no usable reply exists.
StanceAssessment unclassifiable_assessment(const std::string& pmid);

ChatRequest build_stance_request(const HealthQuestion& question, const StudyRecord& doc);

/// Asks the provider for a stance, re-prompting up to twice on unparseable
/// replies before falling back to the flagged neutral assessment.
/// ProviderUnavailable propagates.
StanceAssessment classify_stance(const HealthQuestion& question, const StudyRecord& doc,
                                 ChatProvider& llm);

}  // namespace medqa
