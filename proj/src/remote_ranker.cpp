#include "slidegar/remote_ranker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "slidegar/log.hpp"

namespace slidegar {

namespace {

using json = nlohmann::json;

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::string truncate_tokens(std::string_view text, std::size_t max_tokens)
{
    std::string out;
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < text.size() && count < max_tokens) {
        while (i < text.size() && is_ws(text[i])) {
            ++i;
        }
        auto const start = i;
        while (i < text.size() && !is_ws(text[i])) {
            ++i;
        }
        if (i > start) {
            if (!out.empty()) {
                out.push_back(' ');
            }
            out.append(text.substr(start, i - start));
            ++count;
        }
    }
    return out;
}

json rerank_request_body(Window const &window)
{
    json candidates = json::array();
    for (auto const &d : window.docs) {
        candidates.push_back({{"docno", d.docno}, {"text", truncate_tokens(d.text)}});
    }
    return {{"qid", window.query ? window.query->qid : std::string()},
            {"query", window.query ? window.query->text : std::string()},
            {"candidates", std::move(candidates)}};
}

RemoteRanker::RemoteRanker(RemoteRankerOptions options) : options_(std::move(options))
{
    if (options_.endpoint.empty()) {
        throw ConfigError("remote ranker needs an endpoint");
    }
    auto const scheme_end = options_.endpoint.find("://");
    auto const host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto const path_start = options_.endpoint.find('/', host_start);
    if (path_start == std::string::npos) {
        target_.scheme_host_port = options_.endpoint;
    } else {
        target_.scheme_host_port = options_.endpoint.substr(0, path_start);
        target_.path_prefix = options_.endpoint.substr(path_start);
        while (!target_.path_prefix.empty() && target_.path_prefix.back() == '/') {
            target_.path_prefix.pop_back();
        }
    }
    if (!options_.bearer_token) {
        if (char const *token = std::getenv(kRemoteTokenEnv); token != nullptr && *token != '\0') {
            options_.bearer_token = token;
        }
    }
}

std::chrono::milliseconds RemoteRanker::backoff(unsigned attempt) const
{
    double const ms = static_cast<double>(options_.initial_backoff.count())
                      * std::pow(options_.backoff_multiplier, static_cast<double>(attempt));
    return std::chrono::milliseconds(
        static_cast<std::int64_t>(std::min(ms, static_cast<double>(options_.max_backoff.count()))));
}

std::optional<std::vector<std::string>> RemoteRanker::try_once(Window const &window, std::string const &body,
                                                               std::string &error)
{
    ++attempts_;
    // One client per request: httplib clients are not meant to be shared across threads.
    httplib::Client client(target_.scheme_host_port);
    auto const secs = options_.timeout.count() / 1000;
    auto const usecs = (options_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (options_.bearer_token) {
        headers.emplace("Authorization", "Bearer " + *options_.bearer_token);
    }
    auto res = client.Post(target_.path_prefix + "/rerank", headers, body, "application/json");
    if (!res) {
        error = "transport error: " + httplib::to_string(res.error());
        return std::nullopt;
    }
    if (res->status != 200) {
        error = "HTTP status " + std::to_string(res->status);
        return std::nullopt;
    }
    std::vector<std::string> ordering;
    try {
        auto parsed = json::parse(res->body);
        ordering = parsed.at("ordering").get<std::vector<std::string>>();
    } catch (json::exception const &e) {
        error = std::string("malformed response: ") + e.what();
        return std::nullopt;
    }
    if (!is_permutation_of(window, ordering)) {
        error = "response ordering is not a permutation of the window";
        return std::nullopt;
    }
    return ordering;
}

std::optional<std::vector<std::string>> RemoteRanker::order(Window const &window)
{
    auto const body = rerank_request_body(window).dump();
    std::string error;
    for (unsigned attempt = 0; attempt <= options_.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff(attempt - 1));
        }
        if (auto ordering = try_once(window, body, error)) {
            return *ordering;
        }
        log::info("remote ranker attempt " + std::to_string(attempt + 1) + " failed: " + error);
    }
    ++degradations_;
    log::warn("remote ranker degraded for qid " + (window.query ? window.query->qid : std::string("?")) + " after "
              + std::to_string(options_.retries + 1) + " attempts (" + error + ")");
    return std::nullopt;
}

}  // namespace slidegar
