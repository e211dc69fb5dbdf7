#pragma once

#include "medqa/http.hpp"

#include <atomic>
#include <map>
#include <string>

namespace medqa {

/// Replays recorded upstream responses from a fixture tree instead of the
/// network. Layout under the root:
///
///   pubmed/esearch/index.json     rendered query -> response file
///   pubmed/esearch/no_hits.json   response for any other query
///   pubmed/efetch/<pmid>.xml      one <PubmedArticle> element each
///   pubmed/elink/<pmid>.json      pubmed -> pmc link sets
///   pubmed/oa/<pmcid>.xml         open-access service records
///   enrichment/icite/<pmid>.json  one iCite publication object each
///   enrichment/s2/<pmid>.json     scholarly graph paper objects
///
/// Routing is by URL path, so any configured base URL works.
class FixtureTransport final : public HttpTransport {
public:
    explicit FixtureTransport(std::string root);

    HttpResponse send(const HttpRequest& request) override;

    std::size_t request_count() const { return requests_.load(); }

private:
    HttpResponse esearch(const std::map<std::string, std::string>& params);
    HttpResponse efetch(const std::map<std::string, std::string>& params);
    HttpResponse elink(const std::map<std::string, std::string>& params);
    HttpResponse oa(const std::map<std::string, std::string>& params);
    HttpResponse icite(const std::map<std::string, std::string>& params);
    HttpResponse s2(const std::string& path);

    std::string root_;
    std::atomic<std::size_t> requests_{0};
};

std::string url_decode(std::string_view s);
std::map<std::string, std::string> parse_query_string(std::string_view query);

}  // namespace medqa
