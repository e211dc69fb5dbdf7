#include "medqa/enrichment_client.hpp"

#include "medqa/error.hpp"
#include "medqa/parallel.hpp"
#include "medqa/text.hpp"

#include <nlohmann/json.hpp>

namespace medqa {

EnrichmentClient::EnrichmentClient(std::shared_ptr<ResilientClient> icite,
                                   std::shared_ptr<ResilientClient> s2, EnrichmentConfig config)
    : icite_(std::move(icite)), s2_(std::move(s2)), config_(std::move(config)) {
    require(icite_ && s2_, "enrichment client needs both upstream clients");
}

std::map<std::string, std::int64_t> EnrichmentClient::fetch_citations(
    const std::vector<std::string>& pmids) {
    require(!pmids.empty() && pmids.size() <= kMaxCitationBatch,
            "citation batch must hold between 1 and 100 pmids");
    for (const auto& p : pmids) require(is_valid_pmid(p), "malformed pmid '" + p + "'");

    HttpRequest request;
    request.url = config_.icite_base + "?pmids=" + join(pmids, ",") + "&fl=pmid,citation_count";
    request.timeout = config_.timeout;
    HttpResponse response = icite_->send(request);
    if (response.status >= 400) {
        fail(ErrorCode::UpstreamRejected, "iCite returned HTTP " + std::to_string(response.status));
    }

    std::map<std::string, std::int64_t> counts;
    try {
        auto body = nlohmann::json::parse(response.body);
        for (const auto& pub : body.value("data", nlohmann::json::array())) {
            const auto& id = pub.at("pmid");
            std::string pmid = id.is_string() ? id.get<std::string>() : std::to_string(id.get<std::int64_t>());
            if (!pub.contains("citation_count") || !pub["citation_count"].is_number()) continue;
            auto count = pub["citation_count"].get<std::int64_t>();
            if (count < 0) continue;
            counts[pmid] = count;
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseFailure, std::string("malformed iCite response: ") + e.what());
    }
    return counts;
}

std::optional<std::string> EnrichmentClient::fetch_venue(const std::string& pmid) {
    require(is_valid_pmid(pmid), "malformed pmid '" + pmid + "'");
    HttpRequest request;
    request.url = config_.s2_base + "/PMID:" + pmid + "?fields=venue,journal";
    request.timeout = config_.timeout;
    if (!config_.s2_api_key.empty()) request.headers.emplace_back("x-api-key", config_.s2_api_key);
    HttpResponse response = s2_->send(request);
    if (response.status == 404) return std::nullopt;
    if (response.status >= 400) {
        fail(ErrorCode::UpstreamRejected,
             "scholarly graph returned HTTP " + std::to_string(response.status));
    }
    try {
        auto body = nlohmann::json::parse(response.body);
        std::string venue = body.contains("venue") && body["venue"].is_string()
                                ? collapse_whitespace(body["venue"].get<std::string>())
                                : std::string();
        if (venue.empty() && body.contains("journal") && body["journal"].is_object()) {
            venue = collapse_whitespace(body["journal"].value("name", ""));
        }
        if (venue.empty()) return std::nullopt;
        return venue;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseFailure, std::string("malformed scholarly graph response: ") + e.what());
    }
}

EnrichmentOutcome enrich_best_effort(EnrichmentClient& client, const std::vector<std::string>& pmids,
                                     std::size_t concurrency) {
    EnrichmentOutcome outcome;
    for (const auto& p : pmids) outcome.data[p].pmid = p;
    if (pmids.empty()) return outcome;

    for (std::size_t start = 0; start < pmids.size(); start += kMaxCitationBatch) {
        std::vector<std::string> batch(
            pmids.begin() + static_cast<std::ptrdiff_t>(start),
            pmids.begin() + static_cast<std::ptrdiff_t>(std::min(pmids.size(), start + kMaxCitationBatch)));
        try {
            for (const auto& [pmid, count] : client.fetch_citations(batch)) {
                auto it = outcome.data.find(pmid);
                if (it == outcome.data.end()) continue;
                it->second.citation_count = count;
                it->second.sources.insert(EnrichmentSource::CitationsFromIcite);
            }
        } catch (const Error& e) {
            outcome.diagnostics.push_back(std::string("citation lookup failed: ") + e.what());
        }
    }

    std::vector<std::optional<std::string>> venues(pmids.size());
    std::vector<std::string> failures(pmids.size());
    parallel_for(pmids.size(), concurrency, [&](std::size_t i) {
        try {
            venues[i] = client.fetch_venue(pmids[i]);
        } catch (const Error& e) {
            failures[i] = "venue lookup failed for " + pmids[i] + ": " + e.what();
        }
    });
    for (std::size_t i = 0; i < pmids.size(); ++i) {
        if (!failures[i].empty()) outcome.diagnostics.push_back(failures[i]);
        if (venues[i]) {
            auto& d = outcome.data[pmids[i]];
            d.venue = venues[i];
            d.sources.insert(EnrichmentSource::VenueFromS2);
        }
    }
    return outcome;
}

void apply_enrichment(StudyRecord& record, const EnrichmentData& data) {
    if (data.citation_count) record.citation_count = data.citation_count;
    if (data.venue) record.venue = data.venue;
}

}  // namespace medqa
