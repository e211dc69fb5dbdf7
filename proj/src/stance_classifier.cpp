#include "medqa/stance_classifier.hpp"

#include "medqa/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace medqa {

namespace {

constexpr std::string_view kReprompt =
    "\n\nYour previous reply could not be parsed. Reply with only the JSON object "
    "{\"support\": number, \"refute\": number, \"neutral\": number, \"rationale\": string}.";

// End offset (exclusive) of the balanced object starting at `start`, or npos.
std::size_t object_end(std::string_view s, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

double weight_field(const nlohmann::json& obj, const char* key) {
    if (!obj.contains(key) || !obj[key].is_number()) {
        fail(ErrorCode::UnparseableResponse, std::string("stance reply lacks numeric '") + key + "'");
    }
    double v = obj[key].get<double>();
    if (v < 0.0) fail(ErrorCode::UnparseableResponse, std::string("negative '") + key + "' weight");
    return v;
}

}  // namespace

std::string_view to_string(StanceLabel label) {
    switch (label) {
        case StanceLabel::Supported: return "supported";
        case StanceLabel::Refuted: return "refuted";
        case StanceLabel::Neutral: return "neutral";
    }
    return "neutral";
}

StanceLabel dominant_of(const StanceWeights& w) {
    if (w.support >= w.refute && w.support >= w.neutral) return StanceLabel::Supported;
    if (w.refute >= w.neutral) return StanceLabel::Refuted;
    return StanceLabel::Neutral;
}

StanceWeights normalize(const StanceWeights& w) {
    if (w.support < 0.0 || w.refute < 0.0 || w.neutral < 0.0) {
        fail(ErrorCode::UnparseableResponse, "negative stance weight");
    }
    double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
        fail(ErrorCode::UnparseableResponse, "stance weights do not have a positive finite sum");
    }
    return StanceWeights{w.support / total, w.refute / total, w.neutral / total};
}

ParsedStance parse_stance_response(std::string_view raw) {
    for (std::size_t start = raw.find('{'); start != std::string_view::npos;
         start = raw.find('{', start + 1)) {
        std::size_t end = object_end(raw, start);
        if (end == std::string_view::npos) break;
        auto obj = nlohmann::json::parse(raw.substr(start, end - start), nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) continue;
        ParsedStance parsed;
        parsed.weights = normalize(StanceWeights{weight_field(obj, "support"),
                                                 weight_field(obj, "refute"),
                                                 weight_field(obj, "neutral")});
        if (obj.contains("rationale") && obj["rationale"].is_string()) {
            parsed.rationale = obj["rationale"].get<std::string>();
        }
        return parsed;
    }
    fail(ErrorCode::UnparseableResponse, "no JSON object in stance reply");
}

void to_json(nlohmann::json& j, const StanceAssessment& a) {
    j = nlohmann::json{{"pmid", a.pmid},
                       {"weights",
                        {{"support", a.weights.support},
                         {"refute", a.weights.refute},
                         {"neutral", a.weights.neutral}}},
                       {"dominant", std::string(to_string(a.dominant))},
                       {"rationale", a.rationale},
                       {"unclassifiable", a.unclassifiable}};
}

StanceAssessment unclassifiable_assessment(const std::string& pmid) {
    StanceAssessment a;
    a.pmid = pmid;
    a.weights = StanceWeights{0.0, 0.0, 1.0};
    a.dominant = StanceLabel::Neutral;
    a.rationale = std::string(kUnclassifiable);
    a.unclassifiable = true;
    return a;
}

ChatRequest build_stance_request(const HealthQuestion& question, const StudyRecord& doc) {
    ChatRequest request;
    request.purpose = ChatPurpose::Stance;
    request.system = std::string(stance_prompt_asset());
    request.user = "Question: " + question.text() + "\n\nStudy title: " + doc.title +
                   "\n\nAbstract: " + doc.abstract;
    return request;
}

StanceAssessment classify_stance(const HealthQuestion& question, const StudyRecord& doc,
                                 ChatProvider& llm) {
    require(!doc.abstract.empty(), "stance requested for study " + doc.pmid + " without abstract");
    ChatRequest request = build_stance_request(question, doc);
    for (int attempt = 0; attempt <= kStanceReprompts; ++attempt) {
        std::string reply = llm.complete(request);
        try {
            ParsedStance parsed = parse_stance_response(reply);
            StanceAssessment a;
            a.pmid = doc.pmid;
            a.weights = parsed.weights;
            a.dominant = dominant_of(parsed.weights);
            a.rationale = parsed.rationale;
            return a;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::UnparseableResponse) throw;
        }
        if (attempt == 0) request.user += kReprompt;
    }
    return unclassifiable_assessment(doc.pmid);
}

}  // namespace medqa
