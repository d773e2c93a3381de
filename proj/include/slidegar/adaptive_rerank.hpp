#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <vector>

#include "slidegar/corpus_graph.hpp"
#include "slidegar/corpus_store.hpp"
#include "slidegar/lexical_index.hpp"
#include "slidegar/rankers.hpp"
#include "slidegar/types.hpp"

namespace slidegar {

struct RerankConfig {
    std::size_t window = 20;  ///< w
    std::size_t step = 10;    ///< b, documents carried between windows
    std::size_t budget = 50;  ///< c, documents that may enter a window per query
    std::size_t truncate_k = 16;
    /// Keep unconsumed frontier candidates from earlier windows behind the new ones.
    bool accumulate_frontier = false;

    /// Throws ConfigError unless 1 <= step < window <= budget.
    void validate() const;
};

/// ⌈(c − w)/b⌉ + 1 for c >= w.
std::size_t expected_llm_calls(std::size_t budget, std::size_t window, std::size_t step);

/// Reciprocal-rank pseudo-scores: the doc at rank r gets 1/r.
std::vector<ScoredSource> pseudo_scores(std::span<DocId const> batch);

struct RerankResult {
    Ranking ranking;  ///< best first, synthetic scores 1/position
    CallCounter counter;
    std::chrono::nanoseconds bookkeeping{0};  ///< wall time outside the ranker
    std::size_t escaped = 0;                  ///< output docs not in the initial ranking
};

/// Graph-based adaptive sliding window over `initial`. Windows alternate between the
/// remaining initial ranking and the graph frontier built from the last ranked batch.
RerankResult slidegar(Query const &query, Ranking const &initial, ListwiseRanker &ranker, CorpusGraph const &graph,
                      CorpusStore const &store, RerankConfig const &cfg);

/// Standard back-to-front sliding window over the top `budget` of `initial`.
RerankResult sliding_window(Query const &query, Ranking const &initial, ListwiseRanker &ranker,
                            CorpusStore const &store, RerankConfig const &cfg);

/// Same loop as slidegar, but each follow-up window is filled from a BM25 retrieval with
/// the query expanded from the top of the last batch. The ranker only sees the original
/// query. Falls back to the initial ranking when the expanded retrieval is empty.
RerankResult slidegar_rm3(Query const &query, Ranking const &initial, ListwiseRanker &ranker,
                          InvertedIndex const &index, CorpusStore const &store, RerankConfig const &cfg,
                          Rm3Params const &rm3 = {});

}  // namespace slidegar
