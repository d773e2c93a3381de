#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slidegar/corpus_store.hpp"
#include "slidegar/types.hpp"

namespace slidegar {

struct WindowDoc {
    DocId id;
    std::string_view docno;
    std::string_view text;
};

/// The unit sent to a listwise ranker, in current list order.
struct Window {
    Query const *query = nullptr;
    std::vector<WindowDoc> docs;
};

Window make_window(Query const &query, CorpusStore const &store, std::span<DocId const> ids);

/// The ranker's ordering of a window, best first, mapped back to DocIds.
using Batch = std::vector<DocId>;

struct CallCounter {
    std::uint64_t calls = 0;
    std::uint64_t degraded = 0;  ///< responses replaced by the input order
    std::chrono::nanoseconds ranker_time{0};
};

/// A listwise ranker returns an ordering of docnos and nothing else. Implementations
/// may return garbage; `rank()` is where the permutation contract is enforced.
class ListwiseRanker {
   public:
    virtual ~ListwiseRanker() = default;

    /// Raw ordering of the window's docnos, or nullopt when the ranker gave up on this
    /// window. Must be safe to call concurrently for different queries.
    virtual std::optional<std::vector<std::string>> order(Window const &window) = 0;
};

/// True iff `ordering` is an exact permutation of the window's docnos.
bool is_permutation_of(Window const &window, std::vector<std::string> const &ordering);

/// Calls the ranker once, validates the response, and falls back to the input order
/// (logging a warning) when it is not a permutation.
Batch rank(ListwiseRanker &ranker, Window const &window, CallCounter &counter);

class IdentityRanker final : public ListwiseRanker {
   public:
    std::optional<std::vector<std::string>> order(Window const &window) override;
};

class ReverseRanker final : public ListwiseRanker {
   public:
    std::optional<std::vector<std::string>> order(Window const &window) override;
};

/// Sorts by qrel grade desc; unjudged docs are grade 0; ties keep window order.
class OracleRanker : public ListwiseRanker {
   public:
    explicit OracleRanker(QrelTable qrels) : qrels_(std::move(qrels)) {}

    std::optional<std::vector<std::string>> order(Window const &window) override;

   protected:
    [[nodiscard]] std::vector<WindowDoc> oracle_order(Window const &window) const;

   private:
    QrelTable qrels_;
};

/// Oracle order with each adjacent pair swapped with probability `swap_prob`. The
/// generator is seeded from (seed, qid, window docnos), so a window always gets the
/// same answer regardless of call order or threading.
class NoisyOracleRanker final : public OracleRanker {
   public:
    NoisyOracleRanker(QrelTable qrels, double swap_prob, std::uint64_t seed);

    std::optional<std::vector<std::string>> order(Window const &window) override;

   private:
    double swap_prob_;
    std::uint64_t seed_;
};

}  // namespace slidegar
