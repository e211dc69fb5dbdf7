#pragma once

#include "medqa/http.hpp"
#include "medqa/kv_store.hpp"
#include "medqa/query_builder.hpp"
#include "medqa/text.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace medqa {

inline constexpr int kDefaultPoolSize = 50;
inline constexpr int kMaxSearchLimit = 200;
inline constexpr std::size_t kMaxTags = 5;

struct StudyRecord {
    std::string pmid;
    std::string title;
    std::string abstract;
    bool abstract_missing = false;  // excluded before reranking
    std::optional<int> year;
    std::optional<std::string> venue;
    std::optional<std::int64_t> citation_count;
    bool fulltext_available = false;
    std::optional<std::string> fulltext_locator;
    std::vector<std::string> tags;

    bool operator==(const StudyRecord&) const = default;
};

void to_json(nlohmann::json& j, const StudyRecord& r);
void from_json(const nlohmann::json& j, StudyRecord& r);

struct CandidatePool {
    BooleanQuery query;
    std::vector<StudyRecord> records;
    Timestamp retrieved_at;
};

struct FetchResult {
    std::vector<StudyRecord> records;
    std::vector<std::string> diagnostics;
};

struct FulltextLink {
    bool available = false;
    std::optional<std::string> locator;

    bool operator==(const FulltextLink&) const = default;
};

bool is_valid_pmid(std::string_view pmid);

// Pure parsers over E-utilities payloads.
std::vector<std::string> parse_search_response(std::string_view json_body, std::size_t limit);
FetchResult parse_fetch_response(std::string_view xml, int max_year);
std::optional<std::string> parse_pmc_link(std::string_view elink_json);
std::optional<std::string> parse_oa_pdf_link(std::string_view oa_xml);

struct PubMedConfig {
    std::string eutils_base = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
    std::string oa_service = "https://www.ncbi.nlm.nih.gov/pmc/utils/oa/oa.fcgi";
    std::string api_key;
    std::string tool = "medqa";
    std::chrono::milliseconds timeout{15000};
};

// 3 requests/second without an API key, 10 with one.
std::shared_ptr<RateGate> make_pubmed_gate(bool has_api_key);

/// Pmid-keyed record cache with a time-to-live (default 7 days).
class RecordCache {
public:
    using Clock = std::function<Timestamp()>;

    RecordCache(std::shared_ptr<KvStore> store,
                std::chrono::seconds ttl = std::chrono::hours(24 * 7),
                Clock clock = [] { return std::chrono::system_clock::now(); });

    std::optional<StudyRecord> get(const std::string& pmid);
    void put(const StudyRecord& record);

private:
    std::shared_ptr<KvStore> store_;
    std::chrono::seconds ttl_;
    Clock clock_;
};

class PubMedClient {
public:
    PubMedClient(std::shared_ptr<ResilientClient> client, PubMedConfig config,
                 std::shared_ptr<RecordCache> cache = nullptr);

    // One relevance-sorted esearch request; at most `limit` pmids in API order.
    std::vector<std::string> search_candidates(const BooleanQuery& query,
                                               int limit = kDefaultPoolSize);

    // Records in request order; unknown pmids are absent, malformed ones are
    // skipped and reported in diagnostics.
    FetchResult fetch_records(const std::vector<std::string>& pmids);

    FulltextLink resolve_fulltext(const std::string& pmid);

private:
    std::string eutils_url(const std::string& utility, const std::string& params) const;
    HttpResponse get(const std::string& url);

    std::shared_ptr<ResilientClient> client_;
    PubMedConfig config_;
    std::shared_ptr<RecordCache> cache_;
};

}  // namespace medqa
