#include "medqa/pubmed_client.hpp"

#include "medqa/error.hpp"

#include <boost/property_tree/detail/rapidxml.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <ctime>
#include <set>
#include <unordered_map>

namespace medqa {

namespace rx = boost::property_tree::detail::rapidxml;

namespace {

using XmlNode = rx::xml_node<char>;

int current_year() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    return tm.tm_year + 1900;
}

const XmlNode* child(const XmlNode* node, const char* name) {
    return node ? node->first_node(name) : nullptr;
}

const XmlNode* path(const XmlNode* node, std::initializer_list<const char*> names) {
    for (const char* name : names) node = child(node, name);
    return node;
}

std::string_view attribute(const XmlNode* node, const char* name) {
    if (!node) return {};
    auto* attr = node->first_attribute(name);
    return attr ? std::string_view(attr->value(), attr->value_size()) : std::string_view{};
}

// Concatenated character data of an element and all its descendants, in
// document order (inline markup such as <i> or <sup> is flattened).
void collect_text(const XmlNode* node, std::string& out) {
    for (auto* n = node->first_node(); n; n = n->next_sibling()) {
        if (n->type() == rx::node_data || n->type() == rx::node_cdata) {
            out.append(n->value(), n->value_size());
        } else if (n->type() == rx::node_element) {
            collect_text(n, out);
        }
    }
}

std::string text_of(const XmlNode* node) {
    if (!node) return {};
    std::string out;
    collect_text(node, out);
    return collapse_whitespace(out);
}

std::optional<int> leading_year(std::string_view s) {
    s = trim(s);
    if (s.size() < 4) return std::nullopt;
    int year = 0;
    for (int i = 0; i < 4; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
        year = year * 10 + (s[i] - '0');
    }
    return year;
}

std::optional<int> record_year(const XmlNode* citation, const XmlNode* pubmed_data) {
    const XmlNode* article = child(citation, "Article");
    const XmlNode* pub_date = path(article, {"Journal", "JournalIssue", "PubDate"});
    if (auto* y = child(pub_date, "Year")) return leading_year(text_of(y));
    if (auto* md = child(pub_date, "MedlineDate")) return leading_year(text_of(md));
    if (auto* y = path(article, {"ArticleDate", "Year"})) return leading_year(text_of(y));
    if (auto* history = child(pubmed_data, "History")) {
        for (auto* d = history->first_node("PubMedPubDate"); d; d = d->next_sibling("PubMedPubDate")) {
            if (attribute(d, "PubStatus") == "pubmed") return leading_year(text_of(child(d, "Year")));
        }
    }
    return std::nullopt;
}

std::vector<std::string> record_tags(const XmlNode* citation) {
    std::vector<std::string> major;
    std::vector<std::string> minor;
    if (auto* list = child(citation, "MeshHeadingList")) {
        for (auto* h = list->first_node("MeshHeading"); h; h = h->next_sibling("MeshHeading")) {
            auto* d = child(h, "DescriptorName");
            if (!d) continue;
            bool is_major = attribute(d, "MajorTopicYN") == "Y";
            for (auto* q = h->first_node("QualifierName"); q && !is_major;
                 q = q->next_sibling("QualifierName")) {
                is_major = attribute(q, "MajorTopicYN") == "Y";
            }
            (is_major ? major : minor).push_back(text_of(d));
        }
    }
    if (auto* list = child(citation, "KeywordList")) {
        for (auto* k = list->first_node("Keyword"); k; k = k->next_sibling("Keyword")) {
            minor.push_back(text_of(k));
        }
    }
    std::vector<std::string> tags;
    std::set<std::string> seen;
    for (auto* group : {&major, &minor}) {
        for (auto& t : *group) {
            if (t.empty() || !seen.insert(to_lower(t)).second) continue;
            if (tags.size() < kMaxTags) tags.push_back(t);
        }
    }
    return tags;
}

StudyRecord parse_article(const XmlNode* article_node, int max_year) {
    const XmlNode* citation = child(article_node, "MedlineCitation");
    if (!citation) fail(ErrorCode::ParseFailure, "PubmedArticle without MedlineCitation");
    StudyRecord record;
    record.pmid = text_of(child(citation, "PMID"));
    if (!is_valid_pmid(record.pmid)) {
        fail(ErrorCode::ParseFailure, "record with missing or malformed PMID '" + record.pmid + "'");
    }
    const XmlNode* article = child(citation, "Article");
    if (!article) fail(ErrorCode::ParseFailure, "record " + record.pmid + " has no Article element");
    record.title = text_of(child(article, "ArticleTitle"));
    if (record.title.empty()) record.title = text_of(child(article, "VernacularTitle"));

    std::vector<std::string> sections;
    if (auto* abstract = child(article, "Abstract")) {
        for (auto* t = abstract->first_node("AbstractText"); t; t = t->next_sibling("AbstractText")) {
            std::string text = text_of(t);
            if (!text.empty()) sections.push_back(std::move(text));
        }
    }
    record.abstract = join(sections, " ");
    record.abstract_missing = record.abstract.empty();

    auto year = record_year(citation, child(article_node, "PubmedData"));
    if (year && *year >= 1800 && *year <= max_year) record.year = year;

    std::string journal = text_of(path(article, {"Journal", "Title"}));
    if (!journal.empty()) record.venue = journal;
    record.tags = record_tags(citation);
    return record;
}

}  // namespace

void to_json(nlohmann::json& j, const StudyRecord& r) {
    j = nlohmann::json{{"pmid", r.pmid},
                       {"title", r.title},
                       {"abstract", r.abstract},
                       {"abstract_missing", r.abstract_missing},
                       {"year", r.year ? nlohmann::json(*r.year) : nlohmann::json(nullptr)},
                       {"venue", r.venue ? nlohmann::json(*r.venue) : nlohmann::json(nullptr)},
                       {"citation_count",
                        r.citation_count ? nlohmann::json(*r.citation_count) : nlohmann::json(nullptr)},
                       {"fulltext_available", r.fulltext_available},
                       {"fulltext_locator", r.fulltext_locator ? nlohmann::json(*r.fulltext_locator)
                                                               : nlohmann::json(nullptr)},
                       {"tags", r.tags}};
}

void from_json(const nlohmann::json& j, StudyRecord& r) {
    r.pmid = j.at("pmid").get<std::string>();
    r.title = j.value("title", "");
    r.abstract = j.value("abstract", "");
    r.abstract_missing = j.value("abstract_missing", r.abstract.empty());
    auto opt = [&](const char* key) { return j.contains(key) && !j.at(key).is_null(); };
    r.year = opt("year") ? std::optional<int>(j.at("year").get<int>()) : std::nullopt;
    r.venue = opt("venue") ? std::optional<std::string>(j.at("venue").get<std::string>()) : std::nullopt;
    r.citation_count = opt("citation_count")
                           ? std::optional<std::int64_t>(j.at("citation_count").get<std::int64_t>())
                           : std::nullopt;
    r.fulltext_available = j.value("fulltext_available", false);
    r.fulltext_locator = opt("fulltext_locator")
                             ? std::optional<std::string>(j.at("fulltext_locator").get<std::string>())
                             : std::nullopt;
    r.tags = j.value("tags", std::vector<std::string>{});
}

bool is_valid_pmid(std::string_view pmid) {
    if (pmid.empty() || pmid.size() > 10 || pmid.front() == '0') return false;
    return std::all_of(pmid.begin(), pmid.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::vector<std::string> parse_search_response(std::string_view json_body, std::size_t limit) {
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(json_body);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseFailure, std::string("esearch response is not JSON: ") + e.what());
    }
    if (body.contains("error")) {
        fail(ErrorCode::UpstreamRejected, "esearch error: " + body["error"].dump());
    }
    if (!body.contains("esearchresult")) {
        fail(ErrorCode::ParseFailure, "esearch response lacks esearchresult");
    }
    const auto& result = body["esearchresult"];
    if (result.contains("ERROR")) {
        fail(ErrorCode::UpstreamRejected, "esearch rejected query: " + result["ERROR"].dump());
    }
    std::vector<std::string> pmids;
    std::set<std::string> seen;
    for (const auto& id : result.value("idlist", nlohmann::json::array())) {
        if (pmids.size() >= limit) break;
        auto pmid = id.get<std::string>();
        if (!is_valid_pmid(pmid) || !seen.insert(pmid).second) continue;
        pmids.push_back(std::move(pmid));
    }
    return pmids;
}

FetchResult parse_fetch_response(std::string_view xml, int max_year) {
    std::string buffer(xml);
    buffer.push_back('\0');
    rx::xml_document<char> doc;
    try {
        doc.parse<rx::parse_default>(buffer.data());
    } catch (const rx::parse_error& e) {
        fail(ErrorCode::ParseFailure, std::string("efetch XML malformed: ") + e.what());
    }
    FetchResult result;
    const XmlNode* set = doc.first_node("PubmedArticleSet");
    if (!set) fail(ErrorCode::ParseFailure, "efetch response lacks PubmedArticleSet");
    std::set<std::string> seen;
    for (auto* n = set->first_node(); n; n = n->next_sibling()) {
        if (n->type() != rx::node_element) continue;
        std::string_view name(n->name(), n->name_size());
        if (name != "PubmedArticle") {
            result.diagnostics.push_back("skipped unsupported record type " + std::string(name));
            continue;
        }
        try {
            StudyRecord record = parse_article(n, max_year);
            if (!seen.insert(record.pmid).second) continue;
            result.records.push_back(std::move(record));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ParseFailure) throw;
            result.diagnostics.push_back(e.what());
        }
    }
    return result;
}

std::optional<std::string> parse_pmc_link(std::string_view elink_json) {
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(elink_json);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseFailure, std::string("elink response is not JSON: ") + e.what());
    }
    for (const auto& linkset : body.value("linksets", nlohmann::json::array())) {
        for (const auto& db : linkset.value("linksetdbs", nlohmann::json::array())) {
            if (db.value("linkname", "") != "pubmed_pmc") continue;
            for (const auto& link : db.value("links", nlohmann::json::array())) {
                std::string id = link.is_string() ? link.get<std::string>() : link.dump();
                if (!id.empty()) return "PMC" + id;
            }
        }
    }
    return std::nullopt;
}

std::optional<std::string> parse_oa_pdf_link(std::string_view oa_xml) {
    std::string buffer(oa_xml);
    buffer.push_back('\0');
    rx::xml_document<char> doc;
    try {
        doc.parse<rx::parse_default>(buffer.data());
    } catch (const rx::parse_error& e) {
        fail(ErrorCode::ParseFailure, std::string("OA service XML malformed: ") + e.what());
    }
    const XmlNode* records = path(doc.first_node("OA"), {"records"});
    for (auto* r = records ? records->first_node("record") : nullptr; r; r = r->next_sibling("record")) {
        if (attribute(r, "retracted") == "yes") continue;
        for (auto* l = r->first_node("link"); l; l = l->next_sibling("link")) {
            if (attribute(l, "format") != "pdf") continue;
            std::string href(attribute(l, "href"));
            if (href.rfind("ftp://", 0) == 0) href = "https://" + href.substr(6);
            if (!href.empty()) return href;
        }
    }
    return std::nullopt;
}

std::shared_ptr<RateGate> make_pubmed_gate(bool has_api_key) {
    return std::make_shared<RateGate>(has_api_key ? 10.0 : 3.0);
}

RecordCache::RecordCache(std::shared_ptr<KvStore> store, std::chrono::seconds ttl, Clock clock)
    : store_(std::move(store)), ttl_(ttl), clock_(std::move(clock)) {
    require(store_ != nullptr, "record cache needs a store");
}

std::optional<StudyRecord> RecordCache::get(const std::string& pmid) {
    auto raw = store_->get("pubmed:" + pmid);
    if (!raw) return std::nullopt;
    try {
        auto entry = nlohmann::json::parse(*raw);
        auto stored_at = Timestamp(std::chrono::seconds(entry.at("stored_at").get<std::int64_t>()));
        if (clock_() - stored_at > ttl_) return std::nullopt;
        return entry.at("record").get<StudyRecord>();
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

void RecordCache::put(const StudyRecord& record) {
    auto now = std::chrono::duration_cast<std::chrono::seconds>(clock_().time_since_epoch());
    nlohmann::json entry{{"stored_at", now.count()}, {"record", record}};
    store_->put("pubmed:" + record.pmid, entry.dump());
}

PubMedClient::PubMedClient(std::shared_ptr<ResilientClient> client, PubMedConfig config,
                           std::shared_ptr<RecordCache> cache)
    : client_(std::move(client)), config_(std::move(config)), cache_(std::move(cache)) {
    require(client_ != nullptr, "PubMed client needs a transport");
}

std::string PubMedClient::eutils_url(const std::string& utility, const std::string& params) const {
    std::string url = config_.eutils_base + "/" + utility + "?" + params;
    url += "&tool=" + url_encode(config_.tool);
    if (!config_.api_key.empty()) url += "&api_key=" + url_encode(config_.api_key);
    return url;
}

HttpResponse PubMedClient::get(const std::string& url) {
    HttpRequest request;
    request.url = url;
    request.timeout = config_.timeout;
    HttpResponse response = client_->send(request);
    if (response.status >= 400) {
        fail(ErrorCode::UpstreamRejected,
             "PubMed returned HTTP " + std::to_string(response.status) + " for " + url);
    }
    return response;
}

std::vector<std::string> PubMedClient::search_candidates(const BooleanQuery& query, int limit) {
    require(!query.rendered.empty(), "rendered query is empty");
    require(limit >= 1 && limit <= kMaxSearchLimit, "search limit must be in [1, 200]");
    auto url = eutils_url("esearch.fcgi", "db=pubmed&retmode=json&sort=relevance&retmax=" +
                                              std::to_string(limit) +
                                              "&term=" + url_encode(query.rendered));
    return parse_search_response(get(url).body, static_cast<std::size_t>(limit));
}

FetchResult PubMedClient::fetch_records(const std::vector<std::string>& pmids) {
    require(!pmids.empty() && pmids.size() <= static_cast<std::size_t>(kMaxSearchLimit),
            "fetch needs between 1 and 200 pmids");
    std::vector<std::string> wanted;
    std::set<std::string> seen;
    for (const auto& p : pmids) {
        require(is_valid_pmid(p), "malformed pmid '" + p + "'");
        if (seen.insert(p).second) wanted.push_back(p);
    }

    std::unordered_map<std::string, StudyRecord> found;
    std::vector<std::string> missing;
    for (const auto& p : wanted) {
        std::optional<StudyRecord> cached = cache_ ? cache_->get(p) : std::nullopt;
        if (cached) {
            found.emplace(p, std::move(*cached));
        } else {
            missing.push_back(p);
        }
    }

    FetchResult result;
    if (!missing.empty()) {
        auto url = eutils_url("efetch.fcgi", "db=pubmed&retmode=xml&id=" + join(missing, ","));
        FetchResult fetched = parse_fetch_response(get(url).body, current_year() + 1);
        result.diagnostics = std::move(fetched.diagnostics);
        for (auto& r : fetched.records) {
            if (!seen.count(r.pmid) || found.count(r.pmid)) continue;
            if (cache_) cache_->put(r);
            found.emplace(r.pmid, std::move(r));
        }
    }
    for (const auto& p : wanted) {
        auto it = found.find(p);
        if (it != found.end()) result.records.push_back(std::move(it->second));
    }
    return result;
}

FulltextLink PubMedClient::resolve_fulltext(const std::string& pmid) {
    require(is_valid_pmid(pmid), "malformed pmid '" + pmid + "'");
    auto link_url = eutils_url("elink.fcgi", "dbfrom=pubmed&db=pmc&retmode=json&id=" + pmid);
    auto pmcid = parse_pmc_link(get(link_url).body);
    if (!pmcid) return {};

    HttpRequest request;
    request.url = config_.oa_service + "?id=" + *pmcid;
    request.timeout = config_.timeout;
    HttpResponse response = client_->send(request);
    if (response.status >= 400) return {};
    auto pdf = parse_oa_pdf_link(response.body);
    if (!pdf) return {};
    return FulltextLink{true, std::move(pdf)};
}

}  // namespace medqa
