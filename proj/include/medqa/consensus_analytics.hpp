#pragma once

#include "medqa/pubmed_client.hpp"
#include "medqa/stance_classifier.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace medqa {

struct LabelCounts {
    int supported = 0;
    int refuted = 0;
    int neutral = 0;

    int total() const { return supported + refuted + neutral; }
    void add(StanceLabel label);
    bool operator==(const LabelCounts&) const = default;
};

struct WeightedMass {
    double supported = 0.0;
    double refuted = 0.0;
    double neutral = 0.0;

    double total() const { return supported + refuted + neutral; }
};

struct YearSeries {
    std::map<int, LabelCounts> by_year;  // only years that occur
    LabelCounts unknown;                 // studies without a year
    std::vector<std::string> unknown_pmids;
};

struct ScatterPoint {
    std::string pmid;
    int year = 0;
    std::int64_t citation_count = 0;
    StanceLabel dominant = StanceLabel::Neutral;

    bool operator==(const ScatterPoint&) const = default;
};

struct ConsensusReport {
    LabelCounts label_counts;
    WeightedMass weighted_mass;
    YearSeries year_series;
    std::vector<ScatterPoint> scatter;
    std::vector<std::string> diagnostics;
};

void to_json(nlohmann::json& j, const ConsensusReport& r);

LabelCounts label_distribution(const std::vector<StanceAssessment>& assessments);
WeightedMass weighted_distribution(const std::vector<StanceAssessment>& assessments);

// Assessments whose pmid has no record are counted as unknown-year.
YearSeries per_year_series(const std::vector<StudyRecord>& records,
                           const std::vector<StanceAssessment>& assessments);

// One point per study with both year and citation count, in assessment order.
// `omitted` (when given) receives the pmids left out.
std::vector<ScatterPoint> citation_scatter(const std::vector<StudyRecord>& records,
                                           const std::vector<StanceAssessment>& assessments,
                                           std::vector<std::string>* omitted = nullptr);

ConsensusReport analyze(const std::vector<StudyRecord>& records,
                        const std::vector<StanceAssessment>& assessments);

}  // namespace medqa
