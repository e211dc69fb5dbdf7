#include "medqa/consensus_analytics.hpp"

#include <nlohmann/json.hpp>

#include <unordered_map>

namespace medqa {

namespace {

std::unordered_map<std::string, const StudyRecord*> index_records(
    const std::vector<StudyRecord>& records) {
    std::unordered_map<std::string, const StudyRecord*> index;
    for (const auto& r : records) index.emplace(r.pmid, &r);
    return index;
}

nlohmann::json counts_json(const LabelCounts& c) {
    return {{"supported", c.supported}, {"refuted", c.refuted}, {"neutral", c.neutral}};
}

}  // namespace

void LabelCounts::add(StanceLabel label) {
    switch (label) {
        case StanceLabel::Supported: ++supported; break;
        case StanceLabel::Refuted: ++refuted; break;
        case StanceLabel::Neutral: ++neutral; break;
    }
}

void to_json(nlohmann::json& j, const ConsensusReport& r) {
    nlohmann::json years = nlohmann::json::array();
    for (const auto& [year, counts] : r.year_series.by_year) {
        auto entry = counts_json(counts);
        entry["year"] = year;
        years.push_back(entry);
    }
    nlohmann::json scatter = nlohmann::json::array();
    for (const auto& p : r.scatter) {
        scatter.push_back({{"pmid", p.pmid},
                           {"year", p.year},
                           {"citation_count", p.citation_count},
                           {"dominant", std::string(to_string(p.dominant))}});
    }
    j = nlohmann::json{
        {"label_counts", counts_json(r.label_counts)},
        {"weighted_mass",
         {{"supported", r.weighted_mass.supported},
          {"refuted", r.weighted_mass.refuted},
          {"neutral", r.weighted_mass.neutral}}},
        {"year_series",
         {{"years", years},
          {"unknown", counts_json(r.year_series.unknown)},
          {"unknown_pmids", r.year_series.unknown_pmids}}},
        {"scatter", scatter},
        {"diagnostics", r.diagnostics}};
}

LabelCounts label_distribution(const std::vector<StanceAssessment>& assessments) {
    LabelCounts counts;
    for (const auto& a : assessments) counts.add(a.dominant);
    return counts;
}

WeightedMass weighted_distribution(const std::vector<StanceAssessment>& assessments) {
    WeightedMass mass;
    for (const auto& a : assessments) {
        mass.supported += a.weights.support;
        mass.refuted += a.weights.refute;
        mass.neutral += a.weights.neutral;
    }
    return mass;
}

YearSeries per_year_series(const std::vector<StudyRecord>& records,
                           const std::vector<StanceAssessment>& assessments) {
    auto index = index_records(records);
    YearSeries series;
    for (const auto& a : assessments) {
        auto it = index.find(a.pmid);
        if (it != index.end() && it->second->year) {
            series.by_year[*it->second->year].add(a.dominant);
        } else {
            series.unknown.add(a.dominant);
            series.unknown_pmids.push_back(a.pmid);
        }
    }
    return series;
}

std::vector<ScatterPoint> citation_scatter(const std::vector<StudyRecord>& records,
                                           const std::vector<StanceAssessment>& assessments,
                                           std::vector<std::string>* omitted) {
    auto index = index_records(records);
    std::vector<ScatterPoint> points;
    for (const auto& a : assessments) {
        auto it = index.find(a.pmid);
        if (it == index.end() || !it->second->year || !it->second->citation_count) {
            if (omitted) omitted->push_back(a.pmid);
            continue;
        }
        points.push_back({a.pmid, *it->second->year, *it->second->citation_count, a.dominant});
    }
    return points;
}

ConsensusReport analyze(const std::vector<StudyRecord>& records,
                        const std::vector<StanceAssessment>& assessments) {
    ConsensusReport report;
    report.label_counts = label_distribution(assessments);
    report.weighted_mass = weighted_distribution(assessments);
    report.year_series = per_year_series(records, assessments);
    for (const auto& pmid : report.year_series.unknown_pmids) {
        report.diagnostics.push_back("study " + pmid + " has no publication year");
    }
    std::vector<std::string> omitted;
    report.scatter = citation_scatter(records, assessments, &omitted);
    for (const auto& pmid : omitted) {
        report.diagnostics.push_back("study " + pmid + " omitted from citation scatter");
    }
    return report;
}

}  // namespace medqa
