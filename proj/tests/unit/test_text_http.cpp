#include "medqa/error.hpp"
#include "medqa/fixture_transport.hpp"
#include "medqa/http.hpp"
#include "medqa/kv_store.hpp"
#include "medqa/parallel.hpp"
#include "medqa/text.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace medqa;
using medqa::testing::ScriptedTransport;
using medqa::testing::fast_client;

TEST(Text, WhitespaceAndCase) {
    EXPECT_EQ(trim("  a b \n"), "a b");
    EXPECT_EQ(collapse_whitespace(" a \t b\n\nc "), "a b c");
    EXPECT_EQ(to_lower("Vitamin C"), "vitamin c");
    EXPECT_TRUE(starts_with_ci("PubMed", "pub"));
    EXPECT_TRUE(contains_ci("Common Cold", "n co"));
    EXPECT_EQ(split("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
    EXPECT_EQ(join({"a", "b"}, " AND "), "a AND b");
}

TEST(Text, UrlEncodeIsRfc3986) {
    EXPECT_EQ(url_encode(R"(a b"[pt]~)"), "a%20b%22%5Bpt%5D~");
    EXPECT_EQ(url_encode("\xC3\xA9"), "%C3%A9");
}

TEST(Text, Sha256KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Text, FormatUtc) {
    Timestamp t = std::chrono::sys_days{std::chrono::year{2024} / 11 / 20} + std::chrono::hours{8} +
                  std::chrono::minutes{15};
    EXPECT_EQ(format_utc(t), "2024-11-20T08:15:00Z");
}

TEST(Http, SplitUrl) {
    EXPECT_EQ(split_url("https://h.test:8443/a/b?x=1"),
              (std::pair<std::string, std::string>{"https://h.test:8443", "/a/b?x=1"}));
    EXPECT_EQ(split_url("http://h.test").second, "/");
    EXPECT_THROW(split_url("h.test/x"), Error);
}

TEST(RateGate, AdmittedRateStaysUnderLimit) {
    auto gate = std::make_shared<RateGate>(20.0);
    std::vector<std::chrono::steady_clock::time_point> stamps;
    std::mutex m;
    parallel_for(12, 4, [&](std::size_t) {
        gate->acquire();
        std::lock_guard lock(m);
        stamps.push_back(std::chrono::steady_clock::now());
    });
    std::sort(stamps.begin(), stamps.end());
    double span = std::chrono::duration<double>(stamps.back() - stamps.front()).count();
    EXPECT_LE((stamps.size() - 1) / span, 20.0 * 1.05);
}

TEST(ResilientClient, RetriesServerErrorsWithBackoff) {
    auto transport = ScriptedTransport::sequence({{503, ""}, {429, ""}, {200, "ok"}});
    auto client = fast_client(transport);
    EXPECT_EQ(client->send({}).body, "ok");
    EXPECT_EQ(transport->requests().size(), 3u);
}

TEST(ResilientClient, HandsBackClientErrorsWithoutRetry) {
    auto transport = ScriptedTransport::sequence({{404, "nope"}});
    auto client = fast_client(transport);
    EXPECT_EQ(client->send({}).status, 404);
    EXPECT_EQ(transport->requests().size(), 1u);
}

TEST(ResilientClient, ExhaustedRetriesRaiseUpstreamUnavailable) {
    auto transport = std::make_shared<ScriptedTransport>([](const HttpRequest&) -> HttpResponse {
        fail(ErrorCode::UpstreamUnavailable, "connect refused");
    });
    auto client = fast_client(transport, "eutils");
    try {
        client->send({});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UpstreamUnavailable);
        EXPECT_NE(std::string(e.what()).find("eutils"), std::string::npos);
    }
    EXPECT_EQ(transport->requests().size(), 3u);
}

TEST(HttplibTransport, TalksToLocalServer) {
    httplib::Server server;
    server.Get("/ping", [](const httplib::Request& req, httplib::Response& res) {
        res.set_content("pong " + req.get_header_value("X-Probe"), "text/plain");
    });
    server.Post("/echo", [](const httplib::Request& req, httplib::Response& res) {
        res.status = 201;
        res.set_content(req.body, "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttplibTransport transport;
    std::string base = "http://127.0.0.1:" + std::to_string(port);
    HttpRequest get;
    get.url = base + "/ping";
    get.headers = {{"X-Probe", "1"}};
    EXPECT_EQ(transport.send(get).body, "pong 1");
    HttpRequest post;
    post.method = "POST";
    post.url = base + "/echo";
    post.body = R"({"a":1})";
    auto r = transport.send(post);
    EXPECT_EQ(r.status, 201);
    EXPECT_EQ(r.body, R"({"a":1})");
    server.stop();
    t.join();

    HttpRequest dead;
    dead.url = base + "/ping";
    dead.timeout = std::chrono::milliseconds(300);
    try {
        transport.send(dead);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UpstreamUnavailable);
    }
}

TEST(KvStore, MemoryAndSqliteAgree) {
    MemoryKvStore mem;
    SqliteKvStore sql(":memory:");
    for (KvStore* kv : std::vector<KvStore*>{&mem, &sql}) {
        EXPECT_FALSE(kv->get("k"));
        kv->put("k", std::string("v\0w", 3));
        kv->put("k", "v2");
        kv->put("j", "x");
        EXPECT_EQ(kv->get("k"), "v2");
        EXPECT_EQ(kv->size(), 2u);
    }
}

TEST(ParallelFor, VisitsEveryIndexAndRethrows) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) fail(ErrorCode::NotFound, "x"); }),
                 Error);
}

TEST(FixtureTransport, QueryStringDecoding) {
    EXPECT_EQ(url_decode("a+b%20c%2Cd%zz%4"), "a b c,d%zz%4");
    auto q = parse_query_string("term=vitamin+C%5Btiab%5D&retmax=50&flag");
    EXPECT_EQ(q.at("term"), "vitamin C[tiab]");
    EXPECT_EQ(q.at("retmax"), "50");
    EXPECT_EQ(q.at("flag"), "");
    EXPECT_TRUE(parse_query_string("").empty());
}

TEST(FixtureTransport, UnknownRoutesAndIds) {
    FixtureTransport t(medqa::testing::fixtures_dir());
    HttpRequest r;
    r.url = "https://example.org/nothing";
    EXPECT_EQ(t.send(r).status, 404);
    r.url = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/efetch.fcgi?db=pubmed&id=1,99100001";
    auto body = t.send(r).body;
    EXPECT_NE(body.find("<PMID Version=\"1\">99100001</PMID>"), std::string::npos);
    EXPECT_EQ(t.request_count(), 2u);
}
