#include "slidegar/adaptive_rerank.hpp"

#include <algorithm>
#include <unordered_set>

namespace slidegar {

namespace {

using Clock = std::chrono::steady_clock;

// A document that left the window loop for good, with where it was dropped.
struct Dumped {
    DocId id;
    std::size_t iteration = 0;
    std::size_t window_rank = 0;  // 1-based position in the batch
};

// Remaining initial ranking: the initial order minus every document already windowed.
class InitialPool {
   public:
    InitialPool(Ranking const &initial, std::unordered_set<DocId> const &seen) : initial_(initial), seen_(seen) {}

    std::vector<DocId> take(std::size_t n)
    {
        std::vector<DocId> out;
        while (out.size() < n && cursor_ < initial_.size()) {
            auto const id = initial_[cursor_++].id;
            if (!seen_.contains(id) && std::find(out.begin(), out.end(), id) == out.end()) {
                out.push_back(id);
            }
        }
        return out;
    }

   private:
    Ranking const &initial_;
    std::unordered_set<DocId> const &seen_;
    std::size_t cursor_ = 0;
};

Ranking assemble(std::span<DocId const> carried, std::vector<Dumped> dumped, std::size_t budget)
{
    std::stable_sort(dumped.begin(), dumped.end(), [](Dumped const &a, Dumped const &b) {
        if (a.iteration != b.iteration) {
            return a.iteration > b.iteration;
        }
        return a.window_rank < b.window_rank;
    });
    Ranking out;
    out.reserve(carried.size() + dumped.size());
    auto push = [&](DocId id) { out.push_back({id, 1.0 / static_cast<double>(out.size() + 1)}); };
    for (auto id : carried) {
        push(id);
    }
    for (auto const &d : dumped) {
        push(d.id);
    }
    if (out.size() > budget) {
        out.resize(budget);
    }
    return out;
}

std::size_t count_escaped(Ranking const &out, Ranking const &initial)
{
    std::unordered_set<DocId> in_initial;
    for (auto const &sd : initial) {
        in_initial.insert(sd.id);
    }
    return static_cast<std::size_t>(
        std::count_if(out.begin(), out.end(), [&](ScoredDoc const &sd) { return !in_initial.contains(sd.id); }));
}

// The shared window loop. `refill(batch, seen, pool, need)` returns up to `need`
// unseen documents for the next window, or nothing to stop.
template <typename Refill>
RerankResult run_adaptive(Query const &query, Ranking const &initial, ListwiseRanker &ranker, CorpusStore const &store,
                          RerankConfig const &cfg, Refill &&refill)
{
    cfg.validate();
    if (initial.empty()) {
        throw Error("adaptive rerank of qid " + query.qid + ": empty initial ranking");
    }
    auto const started = Clock::now();
    RerankResult result;

    std::unordered_set<DocId> seen;
    InitialPool pool(initial, seen);
    std::vector<Dumped> dumped;
    std::vector<DocId> carried;

    auto window_docs = pool.take(cfg.window);
    seen.insert(window_docs.begin(), window_docs.end());
    for (std::size_t iteration = 1;; ++iteration) {
        auto const window = make_window(query, store, window_docs);
        auto const batch = rank(ranker, window, result.counter);

        auto const keep = std::min(cfg.step, batch.size());
        carried.assign(batch.begin(), batch.begin() + static_cast<std::ptrdiff_t>(keep));
        for (std::size_t i = keep; i < batch.size(); ++i) {
            dumped.push_back({batch[i], iteration, i + 1});
        }
        if (dumped.size() >= cfg.budget - cfg.step) {
            break;
        }
        auto const need = std::min(cfg.step, cfg.budget - seen.size());
        auto fresh = refill(batch, seen, pool, need);
        if (fresh.empty()) {
            break;
        }
        seen.insert(fresh.begin(), fresh.end());
        window_docs = carried;
        window_docs.insert(window_docs.end(), fresh.begin(), fresh.end());
    }

    result.ranking = assemble(carried, std::move(dumped), cfg.budget);
    result.escaped = count_escaped(result.ranking, initial);
    auto const elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - started);
    result.bookkeeping = elapsed - result.counter.ranker_time;
    return result;
}

}  // namespace

void RerankConfig::validate() const
{
    if (step < 1 || step >= window || window > budget) {
        throw ConfigError("rerank config needs 1 <= b < w <= c, got w=" + std::to_string(window)
                          + " b=" + std::to_string(step) + " c=" + std::to_string(budget));
    }
}

std::size_t expected_llm_calls(std::size_t budget, std::size_t window, std::size_t step)
{
    if (budget <= window) {
        return 1;
    }
    return (budget - window + step - 1) / step + 1;
}

std::vector<ScoredSource> pseudo_scores(std::span<DocId const> batch)
{
    std::vector<ScoredSource> out;
    out.reserve(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
        out.push_back({batch[r], 1.0 / static_cast<double>(r + 1)});
    }
    return out;
}

RerankResult slidegar(Query const &query, Ranking const &initial, ListwiseRanker &ranker, CorpusGraph const &graph,
                      CorpusStore const &store, RerankConfig const &cfg)
{
    if (graph.size() != store.size()) {
        throw Error("corpus graph covers " + std::to_string(graph.size()) + " docs, corpus has "
                    + std::to_string(store.size()));
    }
    enum class Pool { initial, frontier };
    Pool selected = Pool::initial;
    std::vector<DocId> frontier;

    auto refill = [&](Batch const &batch, std::unordered_set<DocId> const &seen, InitialPool &initial_pool,
                      std::size_t need) {
        auto const sources = pseudo_scores(batch);
        std::vector<DocId> next;
        for (auto id : neighbours(graph, sources, cfg.truncate_k)) {
            if (!seen.contains(id)) {
                next.push_back(id);
            }
        }
        if (cfg.accumulate_frontier) {
            std::unordered_set<DocId> present(next.begin(), next.end());
            for (auto id : frontier) {
                if (!seen.contains(id) && present.insert(id).second) {
                    next.push_back(id);
                }
            }
        }
        frontier = std::move(next);

        auto take_frontier = [&] {
            auto const n = std::min(need, frontier.size());
            std::vector<DocId> out(frontier.begin(), frontier.begin() + static_cast<std::ptrdiff_t>(n));
            frontier.erase(frontier.begin(), frontier.begin() + static_cast<std::ptrdiff_t>(n));
            return out;
        };

        selected = selected == Pool::initial ? Pool::frontier : Pool::initial;
        auto fresh = selected == Pool::frontier ? take_frontier() : initial_pool.take(need);
        if (fresh.empty()) {
            fresh = selected == Pool::frontier ? initial_pool.take(need) : take_frontier();
        }
        return fresh;
    };
    return run_adaptive(query, initial, ranker, store, cfg, refill);
}

RerankResult slidegar_rm3(Query const &query, Ranking const &initial, ListwiseRanker &ranker,
                          InvertedIndex const &index, CorpusStore const &store, RerankConfig const &cfg,
                          Rm3Params const &rm3)
{
    if (index.doc_count() != store.size()) {
        throw Error("lexical index covers " + std::to_string(index.doc_count()) + " docs, corpus has "
                    + std::to_string(store.size()));
    }
    auto refill = [&](Batch const &batch, std::unordered_set<DocId> const &seen, InitialPool &initial_pool,
                      std::size_t need) {
        auto const top = std::min(cfg.step, batch.size());
        Ranking feedback;
        for (auto const &s : pseudo_scores(std::span<DocId const>(batch).first(top))) {
            feedback.push_back({s.id, s.score});
        }
        std::vector<DocId> fresh;
        try {
            auto const expanded = rm3_expand(index, query.text, feedback, rm3);
            for (auto const &sd : retrieve_expanded(index, expanded, need, seen)) {
                fresh.push_back(sd.id);
            }
        } catch (Error const &) {
            // no usable expansion (e.g. stopword-only feedback): fall through to the initial ranking
        }
        if (fresh.empty()) {
            fresh = initial_pool.take(need);
        }
        return fresh;
    };
    return run_adaptive(query, initial, ranker, store, cfg, refill);
}

RerankResult sliding_window(Query const &query, Ranking const &initial, ListwiseRanker &ranker,
                            CorpusStore const &store, RerankConfig const &cfg)
{
    cfg.validate();
    if (initial.empty()) {
        throw Error("sliding window of qid " + query.qid + ": empty initial ranking");
    }
    auto const started = Clock::now();
    RerankResult result;

    auto const n = std::min(cfg.budget, initial.size());
    std::vector<DocId> list;
    list.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        list.push_back(initial[i].id);
    }
    auto const width = std::min(cfg.window, n);
    std::size_t start = n - width;
    while (true) {
        auto slot = std::span<DocId>(list).subspan(start, width);
        auto const window = make_window(query, store, slot);
        auto const batch = rank(ranker, window, result.counter);
        std::copy(batch.begin(), batch.end(), slot.begin());
        if (start == 0) {
            break;
        }
        start = start > cfg.step ? start - cfg.step : 0;
    }

    result.ranking.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        result.ranking.push_back({list[i], 1.0 / static_cast<double>(i + 1)});
    }
    auto const elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - started);
    result.bookkeeping = elapsed - result.counter.ranker_time;
    return result;
}

}  // namespace slidegar
