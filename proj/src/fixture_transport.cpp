#include "medqa/fixture_transport.hpp"

#include "medqa/error.hpp"
#include "medqa/text.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <filesystem>
#include <optional>

namespace medqa {

namespace fs = std::filesystem;

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::optional<std::string> try_read(const fs::path& p) {
    if (!fs::is_regular_file(p)) return std::nullopt;
    return read_file(p.string());
}

HttpResponse not_found() { return {404, R"({"error":"Not Found"})"}; }

}  // namespace

std::string url_decode(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '+') {
            out.push_back(' ');
        } else if (s[i] == '%' && i + 2 < s.size() &&
                   std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
                   std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
            out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
            i += 2;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::map<std::string, std::string> parse_query_string(std::string_view query) {
    std::map<std::string, std::string> params;
    if (query.empty()) return params;
    for (const auto& pair : split(query, '&')) {
        auto eq = pair.find('=');
        if (eq == std::string::npos) {
            params[url_decode(pair)] = "";
        } else {
            params[url_decode(pair.substr(0, eq))] = url_decode(pair.substr(eq + 1));
        }
    }
    return params;
}

FixtureTransport::FixtureTransport(std::string root) : root_(std::move(root)) {
    require(fs::is_directory(root_), "fixture directory not found: " + root_);
}

HttpResponse FixtureTransport::send(const HttpRequest& request) {
    ++requests_;
    auto [origin, target] = split_url(request.url);
    auto qpos = target.find('?');
    std::string path = target.substr(0, qpos);
    auto params = parse_query_string(qpos == std::string::npos ? "" : target.substr(qpos + 1));

    if (ends_with(path, "/esearch.fcgi")) return esearch(params);
    if (ends_with(path, "/efetch.fcgi")) return efetch(params);
    if (ends_with(path, "/elink.fcgi")) return elink(params);
    if (ends_with(path, "/oa.fcgi")) return oa(params);
    if (ends_with(path, "/api/pubs")) return icite(params);
    if (path.find("/graph/v1/paper/") != std::string::npos) return s2(path);
    return not_found();
}

HttpResponse FixtureTransport::esearch(const std::map<std::string, std::string>& params) {
    fs::path dir = fs::path(root_) / "pubmed" / "esearch";
    auto index = nlohmann::json::parse(read_file((dir / "index.json").string()));
    auto term = params.count("term") ? params.at("term") : std::string();
    std::string file = index.contains(term) ? index[term].get<std::string>() : "no_hits.json";
    auto body = nlohmann::json::parse(read_file((dir / file).string()));
    if (params.count("retmax") && body.contains("esearchresult")) {
        auto retmax = static_cast<std::size_t>(std::stoul(params.at("retmax")));
        auto& ids = body["esearchresult"]["idlist"];
        if (ids.size() > retmax) {
            ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(retmax), ids.end());
        }
        body["esearchresult"]["retmax"] = std::to_string(ids.size());
    }
    return {200, body.dump()};
}

HttpResponse FixtureTransport::efetch(const std::map<std::string, std::string>& params) {
    std::string out = "<?xml version=\"1.0\" ?>\n<PubmedArticleSet>\n";
    if (params.count("id")) {
        for (const auto& id : split(params.at("id"), ',')) {
            if (auto rec = try_read(fs::path(root_) / "pubmed" / "efetch" / (id + ".xml"))) {
                out += *rec;
                out += "\n";
            }
        }
    }
    out += "</PubmedArticleSet>\n";
    return {200, out};
}

HttpResponse FixtureTransport::elink(const std::map<std::string, std::string>& params) {
    std::string id = params.count("id") ? params.at("id") : "";
    if (auto rec = try_read(fs::path(root_) / "pubmed" / "elink" / (id + ".json"))) {
        return {200, *rec};
    }
    nlohmann::json empty{{"header", {{"type", "elink"}, {"version", "0.3"}}},
                         {"linksets", {{{"dbfrom", "pubmed"}, {"ids", {id}}}}}};
    return {200, empty.dump()};
}

HttpResponse FixtureTransport::oa(const std::map<std::string, std::string>& params) {
    std::string id = params.count("id") ? params.at("id") : "";
    if (auto rec = try_read(fs::path(root_) / "pubmed" / "oa" / (id + ".xml"))) {
        return {200, *rec};
    }
    return {200, "<OA><request id=\"" + id +
                     "\"/><error code=\"idIsNotOpenAccess\">identifier '" + id +
                     "' is not Open Access</error></OA>"};
}

HttpResponse FixtureTransport::icite(const std::map<std::string, std::string>& params) {
    nlohmann::json data = nlohmann::json::array();
    if (params.count("pmids")) {
        for (const auto& id : split(params.at("pmids"), ',')) {
            if (auto rec = try_read(fs::path(root_) / "enrichment" / "icite" / (id + ".json"))) {
                data.push_back(nlohmann::json::parse(*rec));
            }
        }
    }
    return {200, nlohmann::json{{"meta", {{"pmids", params.count("pmids") ? params.at("pmids") : ""}}},
                                {"data", data}}
                     .dump()};
}

HttpResponse FixtureTransport::s2(const std::string& path) {
    auto pos = path.find("PMID:");
    if (pos == std::string::npos) return not_found();
    std::string id = path.substr(pos + 5);
    if (auto rec = try_read(fs::path(root_) / "enrichment" / "s2" / (id + ".json"))) {
        return {200, *rec};
    }
    return not_found();
}

}  // namespace medqa
