#include "slidegar/rankers.hpp"

#include <algorithm>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "slidegar/log.hpp"

namespace slidegar {

namespace {

std::vector<std::string> docnos_of(std::vector<WindowDoc> const &docs)
{
    std::vector<std::string> out;
    out.reserve(docs.size());
    for (auto const &d : docs) {
        out.emplace_back(d.docno);
    }
    return out;
}

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes)
{
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    // separator so that ("ab","c") != ("a","bc")
    h ^= 0xFF;
    h *= kFnvPrime;
    return h;
}

}  // namespace

Window make_window(Query const &query, CorpusStore const &store, std::span<DocId const> ids)
{
    Window w;
    w.query = &query;
    w.docs.reserve(ids.size());
    for (auto id : ids) {
        w.docs.push_back({id, store.docno(id), store.text(id)});
    }
    return w;
}

bool is_permutation_of(Window const &window, std::vector<std::string> const &ordering)
{
    if (ordering.size() != window.docs.size()) {
        return false;
    }
    std::unordered_set<std::string_view> expected;
    for (auto const &d : window.docs) {
        expected.insert(d.docno);
    }
    for (auto const &docno : ordering) {
        if (expected.erase(docno) == 0) {
            return false;
        }
    }
    return expected.empty();
}

Batch rank(ListwiseRanker &ranker, Window const &window, CallCounter &counter)
{
    auto const start = std::chrono::steady_clock::now();
    auto ordering = ranker.order(window);
    counter.ranker_time += std::chrono::steady_clock::now() - start;
    ++counter.calls;

    Batch batch;
    batch.reserve(window.docs.size());
    if (!ordering || !is_permutation_of(window, *ordering)) {
        ++counter.degraded;
        log::warn("ranker response for qid " + (window.query ? window.query->qid : std::string("?"))
                  + (ordering ? " is not a permutation of its window" : " unavailable") + "; keeping input order");
        for (auto const &d : window.docs) {
            batch.push_back(d.id);
        }
        return batch;
    }
    std::unordered_map<std::string_view, DocId> ids;
    for (auto const &d : window.docs) {
        ids.emplace(d.docno, d.id);
    }
    for (auto const &docno : *ordering) {
        batch.push_back(ids.at(docno));
    }
    return batch;
}

std::optional<std::vector<std::string>> IdentityRanker::order(Window const &window) { return docnos_of(window.docs); }

std::optional<std::vector<std::string>> ReverseRanker::order(Window const &window)
{
    auto out = docnos_of(window.docs);
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<WindowDoc> OracleRanker::oracle_order(Window const &window) const
{
    GradeMap const *grades = nullptr;
    if (window.query != nullptr) {
        if (auto it = qrels_.find(window.query->qid); it != qrels_.end()) {
            grades = &it->second;
        }
    }
    auto grade_of = [&](DocId d) {
        if (grades == nullptr) {
            return 0;
        }
        auto it = grades->find(d);
        return it == grades->end() ? 0 : it->second;
    };
    auto docs = window.docs;
    std::stable_sort(docs.begin(), docs.end(),
                     [&](WindowDoc const &a, WindowDoc const &b) { return grade_of(a.id) > grade_of(b.id); });
    return docs;
}

std::optional<std::vector<std::string>> OracleRanker::order(Window const &window) { return docnos_of(oracle_order(window)); }

NoisyOracleRanker::NoisyOracleRanker(QrelTable qrels, double swap_prob, std::uint64_t seed)
    : OracleRanker(std::move(qrels)), swap_prob_(swap_prob), seed_(seed)
{
    if (!(swap_prob >= 0.0 && swap_prob <= 1.0)) {
        throw ConfigError("swap_prob must lie in [0, 1]");
    }
}

std::optional<std::vector<std::string>> NoisyOracleRanker::order(Window const &window)
{
    auto docs = oracle_order(window);
    std::uint64_t h = kFnvOffset;
    for (int i = 0; i < 8; ++i) {
        h ^= (seed_ >> (8 * i)) & 0xFF;
        h *= kFnvPrime;
    }
    h = fnv1a(h, window.query ? window.query->qid : std::string_view{});
    for (auto const &d : window.docs) {
        h = fnv1a(h, d.docno);
    }
    std::mt19937_64 rng(h);
    for (std::size_t i = 0; i + 1 < docs.size(); ++i) {
        double const u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (u < swap_prob_) {
            std::swap(docs[i], docs[i + 1]);
            ++i;
        }
    }
    return docnos_of(docs);
}

}  // namespace slidegar
