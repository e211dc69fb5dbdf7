#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace medqa {

struct HttpRequest {
    std::string method = "GET";
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::string content_type;
    std::chrono::milliseconds timeout{15000};
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Synchronous HTTP exchange. Implementations throw Error(UpstreamUnavailable)
// when no response was obtained at all (DNS, connect, read timeout).
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse send(const HttpRequest& request) = 0;
};

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse send(const HttpRequest& request) override;
};

/// Token bucket shared by every caller of one upstream. Callers that find
/// the bucket empty reserve a future slot and sleep until it arrives, so the
/// admitted rate never exceeds `per_second` after the initial burst.
class RateGate {
public:
    using Clock = std::chrono::steady_clock;

    explicit RateGate(double per_second, double burst = 1.0);

    void acquire();
    double rate() const { return per_second_; }

private:
    std::mutex mutex_;
    double per_second_;
    double burst_;
    double tokens_;
    Clock::time_point last_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_delay{500};
};

/// Rate gate + retry in front of a transport. Retries on transport failures,
/// 5xx and 429 with exponential backoff; every other status is handed back to
/// the caller. Exhausted retries raise UpstreamUnavailable.
class ResilientClient {
public:
    ResilientClient(std::shared_ptr<HttpTransport> transport,
                    std::shared_ptr<RateGate> gate,
                    RetryPolicy retry,
                    std::string upstream_name);

    HttpResponse send(const HttpRequest& request);

    const std::string& upstream() const { return upstream_; }

private:
    std::shared_ptr<HttpTransport> transport_;
    std::shared_ptr<RateGate> gate_;
    RetryPolicy retry_;
    std::string upstream_;
};

// Splits "https://host:port/path?x=1" into ("https://host:port", "/path?x=1").
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace medqa
