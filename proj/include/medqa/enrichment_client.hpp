#pragma once

#include "medqa/http.hpp"
#include "medqa/pubmed_client.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace medqa {

enum class EnrichmentSource { CitationsFromIcite, VenueFromS2 };

struct EnrichmentData {
    std::string pmid;
    std::optional<std::int64_t> citation_count;
    std::optional<std::string> venue;
    std::set<EnrichmentSource> sources;  // one flag per filled field
};

struct EnrichmentConfig {
    std::string icite_base = "https://icite.od.nih.gov/api/pubs";
    std::string s2_base = "https://api.semanticscholar.org/graph/v1/paper";
    std::string s2_api_key;
    std::chrono::milliseconds timeout{20000};
};

inline constexpr std::size_t kMaxCitationBatch = 100;

/// Trust-signal lookups: citation counts from iCite, venue from the
/// Semantic Scholar graph API.
class EnrichmentClient {
public:
    EnrichmentClient(std::shared_ptr<ResilientClient> icite, std::shared_ptr<ResilientClient> s2,
                     EnrichmentConfig config = {});

    // One batched request; pmids unknown upstream are absent from the map.
    std::map<std::string, std::int64_t> fetch_citations(const std::vector<std::string>& pmids);

    // Absent on 404 or when the record has no venue.
    std::optional<std::string> fetch_venue(const std::string& pmid);

private:
    std::shared_ptr<ResilientClient> icite_;
    std::shared_ptr<ResilientClient> s2_;
    EnrichmentConfig config_;
};

struct EnrichmentOutcome {
    std::map<std::string, EnrichmentData> data;
    std::vector<std::string> diagnostics;  // one line per failed upstream call
};

// Citation batch plus per-study venue lookups (at most `concurrency` in
// flight). Failures are recorded, never thrown.
EnrichmentOutcome enrich_best_effort(EnrichmentClient& client, const std::vector<std::string>& pmids,
                                     std::size_t concurrency = 4);

// Fills citation_count and venue only; title, abstract and year are untouched.
void apply_enrichment(StudyRecord& record, const EnrichmentData& data);

}  // namespace medqa
