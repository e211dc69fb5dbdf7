#include "medqa/consensus_analytics.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <random>

using namespace medqa;
using namespace medqa::testing;

namespace {

struct Corpus {
    std::vector<StudyRecord> records;
    std::vector<StanceAssessment> assessments;
};

Corpus random_corpus(unsigned seed, int n) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> year(1995, 2003);
    Corpus c;
    for (int i = 0; i < n; ++i) {
        auto pmid = std::to_string(500 + i);
        auto r = make_record(pmid, "t", "a");
        if (i % 6 != 5) r.year = year(rng);
        if (i % 4 != 1) r.citation_count = static_cast<std::int64_t>(unit(rng) * 300);
        c.records.push_back(r);
        StanceAssessment a;
        a.pmid = pmid;
        if (i % 7 == 3) {
            a = unclassifiable_assessment(pmid);
        } else {
            a.weights = normalize({unit(rng), unit(rng), unit(rng) * 0.5});
            a.dominant = dominant_of(a.weights);
        }
        c.assessments.push_back(a);
    }
    return c;
}

}  // namespace

TEST(Analytics, CountsAndMassConserve) {
    auto c = random_corpus(11, 20);
    auto counts = label_distribution(c.assessments);
    auto mass = weighted_distribution(c.assessments);
    EXPECT_EQ(counts.total(), 20);
    EXPECT_NEAR(mass.total(), 20.0, 1e-6);

    LabelCounts oracle_counts;
    double s = 0, r = 0, n = 0;
    for (const auto& a : c.assessments) {
        double best = std::max({a.weights.support, a.weights.refute, a.weights.neutral});
        if (a.weights.support == best) {
            oracle_counts.supported++;
        } else if (a.weights.refute == best) {
            oracle_counts.refuted++;
        } else {
            oracle_counts.neutral++;
        }
        s += a.weights.support;
        r += a.weights.refute;
        n += a.weights.neutral;
    }
    EXPECT_EQ(counts, oracle_counts);
    EXPECT_NEAR(mass.supported, s, 1e-9);
    EXPECT_NEAR(mass.refuted, r, 1e-9);
    EXPECT_NEAR(mass.neutral, n, 1e-9);
}

TEST(Analytics, YearSeriesReconciles) {
    auto c = random_corpus(12, 20);
    auto series = per_year_series(c.records, c.assessments);
    LabelCounts sum = series.unknown;
    for (const auto& [year, counts] : series.by_year) {
        sum.supported += counts.supported;
        sum.refuted += counts.refuted;
        sum.neutral += counts.neutral;
        EXPECT_GT(counts.total(), 0) << year;
    }
    EXPECT_EQ(sum, label_distribution(c.assessments));
    EXPECT_EQ(series.unknown_pmids, (std::vector<std::string>{"505", "511", "517"}));
}

TEST(Analytics, UnknownRecordCountsAsUnknownYear) {
    std::vector<StudyRecord> records{make_record("1", "t", "a", 2001)};
    std::vector<StanceAssessment> assessments{unclassifiable_assessment("1"), unclassifiable_assessment("2")};
    auto series = per_year_series(records, assessments);
    EXPECT_EQ(series.by_year.at(2001).neutral, 1);
    EXPECT_EQ(series.unknown.neutral, 1);
    EXPECT_EQ(series.unknown_pmids, (std::vector<std::string>{"2"}));
}

TEST(Analytics, ScatterNeedsYearAndCitations) {
    auto c = random_corpus(13, 12);
    std::vector<std::string> omitted;
    auto points = citation_scatter(c.records, c.assessments, &omitted);
    std::vector<std::string> expected_omitted;
    std::size_t expected_points = 0;
    for (const auto& r : c.records) {
        if (r.year && r.citation_count) {
            ++expected_points;
        } else {
            expected_omitted.push_back(r.pmid);
        }
    }
    EXPECT_EQ(points.size(), expected_points);
    EXPECT_EQ(omitted, expected_omitted);
    for (std::size_t i = 1; i < points.size(); ++i) EXPECT_TRUE(pmid_less(points[i - 1].pmid, points[i].pmid));
}

TEST(Analytics, ReportJsonAndDiagnostics) {
    auto c = random_corpus(14, 20);
    auto report = analyze(c.records, c.assessments);
    nlohmann::json j = report;
    int years_total = j["year_series"]["unknown"]["supported"].get<int>() +
                      j["year_series"]["unknown"]["refuted"].get<int>() +
                      j["year_series"]["unknown"]["neutral"].get<int>();
    int prev_year = 0;
    for (const auto& y : j["year_series"]["years"]) {
        EXPECT_GT(y["year"].get<int>(), prev_year);
        prev_year = y["year"];
        years_total += y["supported"].get<int>() + y["refuted"].get<int>() + y["neutral"].get<int>();
    }
    EXPECT_EQ(years_total, 20);
    EXPECT_EQ(j["label_counts"]["supported"], report.label_counts.supported);
    std::size_t year_notes = 0, scatter_notes = 0;
    for (const auto& d : report.diagnostics) {
        year_notes += d.find("no publication year") != std::string::npos;
        scatter_notes += d.find("omitted from citation scatter") != std::string::npos;
    }
    EXPECT_EQ(year_notes, report.year_series.unknown_pmids.size());
    EXPECT_EQ(scatter_notes, 20 - report.scatter.size());
}

TEST(Analytics, EmptyInput) {
    auto report = analyze({}, {});
    EXPECT_EQ(report.label_counts.total(), 0);
    EXPECT_EQ(report.weighted_mass.total(), 0.0);
    EXPECT_TRUE(report.scatter.empty());
}
