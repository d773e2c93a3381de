#pragma once

#include <chrono>
#include <optional>
#include <string>

#include <json.hpp>

#include "slidegar/rankers.hpp"

namespace slidegar {

inline constexpr std::size_t kRemoteMaxDocTokens = 512;
inline constexpr char const *kRemoteTokenEnv = "SLIDEGAR_RANKER_TOKEN";

struct RemoteRankerOptions {
    std::string endpoint;  ///< e.g. "http://127.0.0.1:8080"; requests go to `{endpoint}/rerank`
    std::chrono::milliseconds timeout{30000};
    unsigned retries = 3;  ///< extra attempts after the first
    std::chrono::milliseconds initial_backoff{200};
    double backoff_multiplier = 2.0;
    std::chrono::milliseconds max_backoff{10000};
    /// Sent as `Authorization: Bearer <token>`. Defaults to $SLIDEGAR_RANKER_TOKEN.
    std::optional<std::string> bearer_token;
};

/// Keeps the first `max_tokens` whitespace-delimited tokens, joined by single spaces.
std::string truncate_tokens(std::string_view text, std::size_t max_tokens = kRemoteMaxDocTokens);

/// `{"qid":..,"query":..,"candidates":[{"docno":..,"text":..},...]}`
nlohmann::json rerank_request_body(Window const &window);

/// Client for `POST {endpoint}/rerank`. Non-200 statuses, transport errors and malformed
/// or non-permutation orderings are retried with exponential backoff; once retries are
/// exhausted the ranker gives up on the window (nullopt), which `rank()` turns into the
/// input order plus a degradation count.
class RemoteRanker final : public ListwiseRanker {
   public:
    explicit RemoteRanker(RemoteRankerOptions options);

    std::optional<std::vector<std::string>> order(Window const &window) override;

    /// Delay before retry number `attempt` (0-based).
    [[nodiscard]] std::chrono::milliseconds backoff(unsigned attempt) const;

    [[nodiscard]] std::uint64_t http_attempts() const noexcept { return attempts_.load(); }
    [[nodiscard]] std::uint64_t degradations() const noexcept { return degradations_.load(); }

   private:
    struct Target {
        std::string scheme_host_port;
        std::string path_prefix;
    };

    std::optional<std::vector<std::string>> try_once(Window const &window, std::string const &body, std::string &error);

    RemoteRankerOptions options_;
    Target target_;
    std::atomic<std::uint64_t> attempts_{0};
    std::atomic<std::uint64_t> degradations_{0};
};

}  // namespace slidegar
