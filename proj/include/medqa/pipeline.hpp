#pragma once

#include "medqa/answer_synthesizer.hpp"
#include "medqa/config.hpp"
#include "medqa/consensus_analytics.hpp"
#include "medqa/evidence_extractor.hpp"
#include "medqa/stance_classifier.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace medqa {

struct StageTiming {
    std::string stage;
    double millis = 0.0;
};

struct SearchSession {
    std::string session_id;
    std::string question;
    Timestamp created_at;
    BooleanQuery query;
    bool used_fallback_expansion = false;
    bool no_evidence = false;
    std::size_t candidate_count = 0;  // pmids returned by the search stage
    std::vector<StudyRecord> selected;  // rank order
    std::vector<double> similarities;   // parallel to selected
    std::vector<StanceAssessment> assessments;  // parallel to selected
    std::vector<std::optional<EvidenceHighlight>> highlights;  // parallel to selected
    std::optional<SynthesizedAnswer> answer;
    std::optional<CompletenessReport> completeness;
    ConsensusReport report;
    std::vector<std::string> diagnostics;
    std::vector<StageTiming> timings;
    std::optional<nlohmann::json> stage_trace;
};

nlohmann::json session_to_json(const SearchSession& s);

// Per-study detail (metadata, stance, highlight) as served by the document endpoint.
nlohmann::json document_detail(const SearchSession& s, std::size_t rank_index);

/// Expand, retrieve, rerank, enrich, classify and extract, synthesize,
/// analyze. Per-study work fans out with at most `concurrency` calls in
/// flight and is joined by rank index. Best-effort failures become
/// diagnostics; NoEvidenceFound, SynthesisFailed and UpstreamUnavailable
/// are raised.
class Pipeline {
public:
    using Clock = std::function<Timestamp()>;
    using IdSource = std::function<std::string()>;

    Pipeline(PipelineConfig config, PipelineServices services, Clock clock = {}, IdSource ids = {});

    SearchSession run(const HealthQuestion& question);

    // As run(), but a search without usable candidates yields a session with
    // no_evidence set instead of raising NoEvidenceFound.
    SearchSession run_or_empty(const HealthQuestion& question);

    const PipelineConfig& config() const { return config_; }
    PipelineServices& services() { return services_; }

private:
    PipelineConfig config_;
    PipelineServices services_;
    Clock clock_;
    IdSource ids_;
};

// 128-bit random hex identifier.
std::string random_id();

}  // namespace medqa
