#include "medqa/http.hpp"

#include "medqa/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <thread>

namespace medqa {

std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    require(scheme_end != std::string::npos, "url without scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

HttpResponse HttplibTransport::send(const HttpRequest& request) {
    auto [origin, path] = split_url(request.url);
    httplib::Client client(origin);
    auto seconds = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    auto micros = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    client.set_follow_location(true);

    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    const std::string content_type =
        request.content_type.empty() ? "application/json" : request.content_type;

    httplib::Result result{nullptr, httplib::Error::Unknown};
    if (request.method == "GET") {
        result = client.Get(path, headers);
    } else if (request.method == "POST") {
        result = client.Post(path, headers, request.body, content_type);
    } else if (request.method == "PUT") {
        result = client.Put(path, headers, request.body, content_type);
    } else if (request.method == "DELETE") {
        result = client.Delete(path, headers);
    } else {
        fail(ErrorCode::InvalidArgument, "unsupported method " + request.method);
    }
    if (!result) {
        fail(ErrorCode::UpstreamUnavailable,
             origin + ": " + httplib::to_string(result.error()));
    }
    return HttpResponse{result->status, result->body};
}

RateGate::RateGate(double per_second, double burst)
    : per_second_(per_second), burst_(std::max(1.0, burst)), tokens_(burst_), last_(Clock::now()) {
    require(per_second > 0.0, "rate must be positive");
}

void RateGate::acquire() {
    Clock::duration wait{};
    {
        std::lock_guard lock(mutex_);
        auto now = Clock::now();
        double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(burst_, tokens_ + elapsed * per_second_);
        tokens_ -= 1.0;
        if (tokens_ < 0.0) {
            wait = std::chrono::duration_cast<Clock::duration>(
                std::chrono::duration<double>(-tokens_ / per_second_));
        }
    }
    if (wait > Clock::duration::zero()) {
        std::this_thread::sleep_for(wait);
    }
}

ResilientClient::ResilientClient(std::shared_ptr<HttpTransport> transport,
                                 std::shared_ptr<RateGate> gate,
                                 RetryPolicy retry,
                                 std::string upstream_name)
    : transport_(std::move(transport)),
      gate_(std::move(gate)),
      retry_(retry),
      upstream_(std::move(upstream_name)) {
    require(transport_ != nullptr, "transport required");
    require(retry_.attempts >= 1, "at least one attempt required");
}

HttpResponse ResilientClient::send(const HttpRequest& request) {
    std::string last_problem;
    auto delay = retry_.base_delay;
    for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
        if (gate_) gate_->acquire();
        try {
            HttpResponse response = transport_->send(request);
            bool retryable = response.status == 429 || response.status >= 500;
            if (!retryable) {
                return response;
            }
            last_problem = "HTTP " + std::to_string(response.status);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::UpstreamUnavailable) throw;
            last_problem = e.what();
        }
        if (attempt < retry_.attempts) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
    }
    fail(ErrorCode::UpstreamUnavailable,
         upstream_ + " unavailable after " + std::to_string(retry_.attempts) +
             " attempts: " + last_problem);
}

}  // namespace medqa
