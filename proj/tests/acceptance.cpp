// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "graph_oracle.hpp"
#include "metric_fixtures.hpp"
#include "slidegar/adaptive_rerank.hpp"
#include "slidegar/log.hpp"
#include "slidegar/pipeline.hpp"
#include "slidegar/synth.hpp"
#include "step_simulator.hpp"
#include "support.hpp"

using namespace slidegar;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr double kRecallGainMin = 0.20;
constexpr double kBaselineRecallCap = 0.5;
constexpr double kEps = 1e-9;
constexpr double kTrendDip = 0.01;
constexpr double kMetricTol = 1e-9;
constexpr double kCallCountSeconds = 5.0;
constexpr double kEscapeSeconds = 30.0;
constexpr double kOverheadMs = 50.0;
constexpr int kRandomCallConfigs = 250;
constexpr int kSimulatorInstances = 1500;
constexpr int kFaultInstances = 500;

struct Outcome {
    enum class Status { pass, fail, warn } status = Status::pass;
    std::string detail;
};

int failures = 0;

void report(std::string const &name, Outcome const &o)
{
    char const *tag = o.status == Outcome::Status::pass ? "PASS" : o.status == Outcome::Status::warn ? "WARN" : "FAIL";
    std::cout << tag << "  " << name << "  " << o.detail << std::endl;
    if (o.status == Outcome::Status::fail) {
        ++failures;
    }
}

void criterion(std::string const &name, std::function<Outcome()> const &body)
{
    try {
        report(name, body());
    } catch (std::exception const &e) {
        report(name, {Outcome::Status::fail, std::string("exception: ") + e.what()});
    }
}

Outcome verdict(bool ok, std::string detail)
{
    return {ok ? Outcome::Status::pass : Outcome::Status::fail, std::move(detail)};
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int precision = 4)
{
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(precision);
    s << v;
    return s.str();
}

Query const kQuery{"q1", "unused"};

CorpusGraph random_graph(std::size_t n, std::size_t k, std::mt19937_64 &rng, bool ragged)
{
    std::vector<std::uint32_t> adj(n * k, kNoNeighbor);
    for (std::size_t d = 0; d < n; ++d) {
        std::size_t const len = std::min(ragged ? rng() % (k + 1) : k, n - 1);
        std::size_t filled = 0;
        while (filled < len) {
            auto const v = static_cast<std::uint32_t>(rng() % n);
            auto row = adj.begin() + static_cast<long>(d * k);
            if (v != d && std::find(row, row + static_cast<long>(filled), v) == row + static_cast<long>(filled)) {
                adj[d * k + filled++] = v;
            }
        }
    }
    return CorpusGraph(k, std::move(adj), SimilaritySource::dense);
}

RerankConfig rerank_config(std::size_t w, std::size_t b, std::size_t c, std::size_t truncate_k = 16)
{
    RerankConfig cfg;
    cfg.window = w;
    cfg.step = b;
    cfg.budget = c;
    cfg.truncate_k = truncate_k;
    return cfg;
}

// ---------------------------------------------------------------------------------------

Outcome call_counts()
{
    auto const start = Clock::now();
    std::mt19937_64 rng(101);
    std::size_t const n = 1000;
    auto store = testing::numbered_store(n);
    auto graph = random_graph(n, 16, rng, false);
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0U);
    ReverseRanker ranker;

    std::ostringstream detail;
    bool ok = true;
    for (std::size_t c : {50, 100}) {
        auto r0 = testing::ranking_of(std::vector<std::uint32_t>(all.begin(), all.begin() + 2 * static_cast<long>(c)));
        auto a = slidegar::slidegar(kQuery, r0, ranker, graph, store, rerank_config(20, 10, c));
        auto b = sliding_window(kQuery, r0, ranker, store, rerank_config(20, 10, c));
        std::size_t const want = c == 50 ? 4 : 9;
        ok = ok && a.counter.calls == want && b.counter.calls == want && expected_llm_calls(c, 20, 10) == want;
        detail << "c=" << c << ":" << a.counter.calls << "/" << b.counter.calls << " ";
    }
    int mismatches = 0;
    for (int i = 0; i < kRandomCallConfigs; ++i) {
        std::size_t const w = 2 + rng() % 30;
        std::size_t const b = 1 + rng() % (w - 1);
        std::size_t const c = w + rng() % 150;
        std::shuffle(all.begin(), all.end(), rng);
        auto r0 = testing::ranking_of(std::vector<std::uint32_t>(all.begin(), all.begin() + static_cast<long>(c)));
        auto const want = expected_llm_calls(c, w, b);
        auto a = slidegar::slidegar(kQuery, r0, ranker, graph, store, rerank_config(w, b, c, 1 + rng() % 16));
        auto s = sliding_window(kQuery, r0, ranker, store, rerank_config(w, b, c));
        if (a.counter.calls != want || s.counter.calls != want || a.ranking.size() != c) {
            ++mismatches;
        }
    }
    double const secs = seconds_since(start);
    ok = ok && mismatches == 0 && secs < kCallCountSeconds;
    detail << "random_configs=" << kRandomCallConfigs << " mismatches=" << mismatches << " time=" << fmt(secs, 2)
           << "s";
    return verdict(ok, detail.str());
}

Outcome hand_traces()
{
    std::ostringstream detail;
    bool ok = true;
    {
        auto store = testing::numbered_store(10);
        std::vector<std::uint32_t> adj(10, kNoNeighbor);
        adj[2] = 9;
        adj[1] = 8;
        CorpusGraph graph(1, adj, SimilaritySource::dense);
        QrelTable qrels;
        qrels["q1"] = {{DocId{2}, 3}, {DocId{9}, 2}, {DocId{1}, 1}};
        OracleRanker oracle(qrels);
        auto r = slidegar::slidegar(kQuery, testing::ranking_of({1, 2, 3, 4}), oracle, graph, store,
                                    rerank_config(2, 1, 4, 1));
        bool const trace = testing::ids_of(r.ranking) == std::vector<std::uint32_t>{2, 3, 9, 1} && r.counter.calls == 3;
        ok = ok && trace;
        detail << "slidegar_trace=" << (trace ? "ok" : "MISMATCH") << " ";

        ReverseRanker reverse;
        auto b = sliding_window(kQuery, testing::ranking_of({1, 2, 3, 4}), reverse, store, rerank_config(2, 1, 4));
        bool const base = testing::ids_of(b.ranking) == std::vector<std::uint32_t>{4, 1, 2, 3} && b.counter.calls == 3;
        ok = ok && base;
        detail << "baseline_trace=" << (base ? "ok" : "MISMATCH") << " ";
    }

    std::mt19937_64 rng(777);
    int disagreements = 0;
    for (int trial = 0; trial < kSimulatorInstances; ++trial) {
        std::size_t const n = 4 + rng() % 27;
        std::size_t const k = 1 + rng() % 5;
        std::size_t const w = 2 + rng() % 6;
        std::size_t const b = 1 + rng() % (w - 1);
        std::size_t const c = w + rng() % (13 - w);
        std::size_t const depth = 1 + rng() % k;
        auto store = testing::numbered_store(n);
        auto graph = random_graph(n, k, rng, true);
        std::map<int, std::vector<int>> adj;
        for (std::uint32_t d = 0; d < n; ++d) {
            for (auto v : graph.row(DocId{d})) {
                if (v != kNoNeighbor) {
                    adj[static_cast<int>(d)].push_back(static_cast<int>(v));
                }
            }
        }
        QrelTable qrels;
        std::map<int, int> grade;
        for (std::uint32_t d = 0; d < n; ++d) {
            grade[static_cast<int>(d)] = static_cast<int>(rng() % 4);
            qrels["q1"][DocId{d}] = grade[static_cast<int>(d)];
        }
        std::vector<std::uint32_t> r0(n);
        std::iota(r0.begin(), r0.end(), 0U);
        std::shuffle(r0.begin(), r0.end(), rng);
        r0.resize(1 + rng() % n);

        OracleRanker oracle(qrels);
        auto got = slidegar::slidegar(kQuery, testing::ranking_of(r0), oracle, graph, store,
                                      rerank_config(w, b, c, depth));
        auto order = [&](std::vector<int> const &win) {
            auto out = win;
            std::stable_sort(out.begin(), out.end(), [&](int x, int y) { return grade[x] > grade[y]; });
            return out;
        };
        auto want = sim::slidegar(std::vector<int>(r0.begin(), r0.end()), adj, depth, w, b, c, order);
        std::vector<int> got_ids;
        for (auto id : testing::ids_of(got.ranking)) {
            got_ids.push_back(static_cast<int>(id));
        }
        if (got_ids != want.ranking || got.counter.calls != want.calls) {
            ++disagreements;
        }
    }
    ok = ok && disagreements == 0;
    detail << "simulator_instances=" << kSimulatorInstances << " disagreements=" << disagreements;
    return verdict(ok, detail.str());
}

// Returns malformed orderings at random and records every response it hands out.
class FaultInjector final : public ListwiseRanker {
   public:
    explicit FaultInjector(std::uint64_t seed) : rng_(seed) {}

    std::optional<std::vector<std::string>> order(Window const &window) override
    {
        std::vector<std::string> d;
        for (auto const &doc : window.docs) {
            d.emplace_back(doc.docno);
        }
        std::shuffle(d.begin(), d.end(), rng_);
        switch (rng_() % 6) {
        case 0: ++faults; return std::nullopt;
        case 1: ++faults; d.push_back(d.front()); return d;                            // extra duplicate
        case 2: ++faults; d.pop_back(); return d;                                       // missing doc
        case 3: ++faults; d.back() = "forged-" + std::to_string(rng_() % 100); return d;  // foreign docno
        default: return d;
        }
    }

    std::uint64_t faults = 0;

   private:
    std::mt19937_64 rng_;
};

Outcome permutation_safety()
{
    std::mt19937_64 rng(4242);
    std::size_t const n = 60;
    auto store = testing::numbered_store(n);
    std::vector<std::vector<std::string>> docs;
    for (std::size_t i = 0; i < n; ++i) {
        docs.push_back({"w" + std::to_string(i % 7), "v" + std::to_string(i % 5), "u" + std::to_string(i % 3)});
    }
    std::vector<Document> lex_docs;
    for (std::size_t i = 0; i < n; ++i) {
        lex_docs.push_back({"d" + std::to_string(i), docs[i][0] + " " + docs[i][1] + " " + docs[i][2]});
    }
    CorpusStore lex_store(lex_docs);
    auto index = InvertedIndex::build(lex_store);
    Query const q{"q1", "w1 v2"};

    int corrupt = 0;
    std::uint64_t injected = 0;
    std::uint64_t degraded = 0;
    for (int trial = 0; trial < kFaultInstances; ++trial) {
        auto graph = random_graph(n, 4, rng, true);
        std::size_t const w = 2 + rng() % 8;
        std::size_t const b = 1 + rng() % (w - 1);
        std::size_t const c = w + rng() % 30;
        std::vector<std::uint32_t> r0(n);
        std::iota(r0.begin(), r0.end(), 0U);
        std::shuffle(r0.begin(), r0.end(), rng);
        r0.resize(1 + rng() % n);
        FaultInjector ranker(rng());
        RerankResult res;
        switch (trial % 3) {
        case 0: res = slidegar::slidegar(q, testing::ranking_of(r0), ranker, graph, lex_store, rerank_config(w, b, c)); break;
        case 1: res = sliding_window(q, testing::ranking_of(r0), ranker, lex_store, rerank_config(w, b, c)); break;
        default: res = slidegar_rm3(q, testing::ranking_of(r0), ranker, index, lex_store, rerank_config(w, b, c)); break;
        }
        injected += ranker.faults;
        degraded += res.counter.degraded;
        std::set<std::uint32_t> uniq;
        for (auto const &sd : res.ranking) {
            if (sd.id.value >= n || !uniq.insert(sd.id.value).second) {
                ++corrupt;
                break;
            }
        }
        if (res.ranking.size() > c || (trial % 3 == 1 && res.ranking.size() != std::min(c, r0.size()))) {
            ++corrupt;
        }
        if (ranker.faults != res.counter.degraded) {
            ++corrupt;
        }
    }
    return verdict(corrupt == 0 && injected > 0 && injected == degraded,
                   "instances=" + std::to_string(kFaultInstances) + " injected=" + std::to_string(injected)
                       + " degraded=" + std::to_string(degraded) + " corrupted=" + std::to_string(corrupt));
}

// ---------------------------------------------------------------------------------------
// Synthetic fixture shared by the retrieval-level criteria.

struct Fixture {
    fs::path dir;
    SynthCollection collection;
    std::map<std::string, DocnoGrades> qrels;

    explicit Fixture(SynthSpec const &spec, std::string const &name) : dir(testing::temp_dir(name))
    {
        collection = generate(spec);
        write_collection(dir / "coll", collection);
        auto ingest = ingest_corpus_file(dir / "coll" / "corpus.tsv", false);
        InvertedIndex::build(ingest.store).save(dir / "idx");
        {
            std::ofstream out(dir / "idx" / "corpus.tsv", std::ios::binary);
            write_corpus_tsv(out, ingest.store);
        }
        build_graph_dense(load_embeddings(collection.doc_embeddings, ingest.store), 16, 0).save(dir / "graph",
                                                                                                  ingest.store);
        qrels = qrels_by_docno(collection.qrels);
    }

    ~Fixture() { fs::remove_all(dir); }

    [[nodiscard]] PipelineConfig config(Strategy strategy) const
    {
        PipelineConfig c;
        c.index = dir / "idx";
        c.queries = dir / "coll" / "queries.tsv";
        c.qrels = dir / "coll" / "qrels.txt";
        c.graph = dir / "graph";
        c.strategy = strategy;
        c.ranker.kind = RankerKind::oracle;
        c.window = 20;
        c.step = 10;
        c.budget = 50;
        c.truncate_k = 16;
        c.run = dir / "out" / (to_string(strategy) + ".run");
        return c;
    }

    // Targeted docs carry grade 2; recall counts only those.
    [[nodiscard]] std::pair<double, double> score(RunFile const &run) const
    {
        EvalOptions options;
        options.rel_threshold = 2;
        auto report = evaluate(run, qrels, {MetricSpec::parse("recall@50"), MetricSpec::parse("ndcg@10")}, options);
        return {report.column("recall@50").mean, report.column("ndcg@10").mean};
    }
};

Fixture &synth_fixture()
{
    static Fixture f(SynthSpec{}, "acceptance");
    return f;
}

Outcome bounded_recall_escape()
{
    auto const start = Clock::now();
    auto &fx = synth_fixture();
    auto base_cfg = fx.config(Strategy::baseline);
    auto artifacts = Artifacts::load(fx.config(Strategy::slidegar));
    auto base = fx.score(run_pipeline(base_cfg, artifacts).run);
    auto sg = fx.score(run_pipeline(fx.config(Strategy::slidegar), artifacts).run);
    double const secs = seconds_since(start);
    double const gain = sg.first - base.first;
    bool const ok = gain >= kRecallGainMin && base.first <= kBaselineRecallCap + kEps && sg.second >= base.second
                    && secs < kEscapeSeconds;
    return verdict(ok, "recall@50 baseline=" + fmt(base.first) + " slidegar=" + fmt(sg.first) + " gain=" + fmt(gain)
                           + " (min " + fmt(kRecallGainMin, 2) + ") ndcg@10 baseline=" + fmt(base.second)
                           + " slidegar=" + fmt(sg.second) + " time=" + fmt(secs, 2) + "s");
}

Outcome graph_depth_trend()
{
    auto &fx = synth_fixture();
    auto artifacts = Artifacts::load(fx.config(Strategy::slidegar));
    std::vector<double> recall;
    std::ostringstream detail;
    for (std::size_t k = 2; k <= 16; k += 2) {
        auto cfg = fx.config(Strategy::slidegar);
        cfg.truncate_k = k;
        recall.push_back(fx.score(run_pipeline(cfg, artifacts).run).first);
        detail << "k" << k << "=" << fmt(recall.back(), 3) << " ";
    }
    double worst_dip = 0.0;
    for (std::size_t i = 1; i < recall.size(); ++i) {
        worst_dip = std::max(worst_dip, recall[i - 1] - recall[i]);
    }
    bool const ok = recall.back() >= recall.front() && worst_dip <= kTrendDip + kEps;
    detail << "worst_dip=" << fmt(worst_dip);
    return verdict(ok, detail.str());
}

Outcome rm3_gain()
{
    auto &fx = synth_fixture();
    auto artifacts = Artifacts::load(fx.config(Strategy::slidegar_rm3));
    auto base = fx.score(run_pipeline(fx.config(Strategy::baseline), artifacts).run);
    auto rm3 = fx.score(run_pipeline(fx.config(Strategy::slidegar_rm3), artifacts).run);
    return verdict(rm3.first > base.first,
                   "recall@50 baseline=" + fmt(base.first) + " slidegar_rm3=" + fmt(rm3.first));
}

Outcome graph_builders()
{
    int mismatches = 0;
    int checked = 0;
    std::mt19937_64 rng(64);
    for (std::size_t k : {2, 4, 8}) {
        std::vector<std::vector<std::string>> docs(64);
        for (auto &d : docs) {
            auto len = 2 + rng() % 10;
            for (std::size_t i = 0; i < len; ++i) {
                d.push_back("t" + std::to_string(rng() % 50));
            }
        }
        auto lex = build_graph_lexical(InvertedIndex::build(docs), k, 2);
        auto want_lex = oracle::top_k_rows(oracle::lexical_similarity(docs), k, true);
        mismatches += std::equal(lex.adjacency().begin(), lex.adjacency().end(), want_lex.begin(), want_lex.end()) ? 0 : 1;

        std::normal_distribution<float> g;
        std::vector<std::vector<float>> raw(64);
        std::vector<float> flat;
        for (auto &v : raw) {
            for (int j = 0; j < 12; ++j) {
                v.push_back(g(rng));
                flat.push_back(v.back());
            }
        }
        auto dense = build_graph_dense(EmbeddingTable(12, flat), k, 2);
        auto want_dense = oracle::top_k_rows(oracle::dense_similarity(raw), k, false);
        mismatches +=
            std::equal(dense.adjacency().begin(), dense.adjacency().end(), want_dense.begin(), want_dense.end()) ? 0 : 1;
        checked += 2;
    }
    return verdict(mismatches == 0,
                   "graphs=" + std::to_string(checked) + " (lexical+dense, 64 docs, k in {2,4,8}) mismatches="
                       + std::to_string(mismatches));
}

Outcome metrics()
{
    auto cases = fixtures::metric_cases();
    double worst = 0.0;
    std::string worst_name;
    for (auto const &c : cases) {
        double const err = std::abs(fixtures::evaluate_case(c) - c.expected);
        if (err >= worst) {
            worst = err;
            worst_name = c.name;
        }
    }
    bool const ok = cases.size() >= 10 && worst <= kMetricTol;
    std::ostringstream detail;
    detail << "fixtures=" << cases.size() << " max_abs_err=" << worst << " (" << worst_name << ")";
    return verdict(ok, detail.str());
}

Outcome overhead()
{
    std::size_t const n = 100000;
    std::mt19937_64 rng(100);
    std::vector<Document> docs;
    docs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        docs.push_back({"d" + std::to_string(i), "text " + std::to_string(i)});
    }
    CorpusStore store(std::move(docs));
    auto graph = random_graph(n, 16, rng, false);
    IdentityRanker ranker;
    std::vector<double> ms;
    for (int q = 0; q < 20; ++q) {
        std::vector<std::uint32_t> r0;
        std::unordered_set<std::uint32_t> used;
        while (r0.size() < 100) {
            auto d = static_cast<std::uint32_t>(rng() % n);
            if (used.insert(d).second) {
                r0.push_back(d);
            }
        }
        auto r = slidegar::slidegar(Query{"q" + std::to_string(q), "x"}, testing::ranking_of(r0), ranker, graph, store,
                                    rerank_config(20, 10, 100));
        ms.push_back(std::chrono::duration<double, std::milli>(r.bookkeeping).count());
    }
    double const mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
    double const worst = *std::max_element(ms.begin(), ms.end());
    Outcome o;
    o.status = mean < kOverheadMs ? Outcome::Status::pass : Outcome::Status::warn;
    o.detail = "bookkeeping per query at c=100 on a 100k-node graph: mean=" + fmt(mean, 3) + "ms max=" + fmt(worst, 3)
               + "ms (threshold " + fmt(kOverheadMs, 0) + "ms, informational)";
    return o;
}

Outcome determinism()
{
    auto &fx = synth_fixture();
    std::ostringstream detail;
    bool ok = true;
    for (auto strategy : {Strategy::baseline, Strategy::slidegar, Strategy::slidegar_rm3}) {
        std::string bytes[2];
        for (int pass = 0; pass < 2; ++pass) {
            auto cfg = fx.config(strategy);
            cfg.ranker.kind = RankerKind::noisy_oracle;
            cfg.ranker.swap_prob = 0.25;
            cfg.ranker.seed = 2025;
            cfg.jobs = pass == 0 ? 1 : 4;
            cfg.run = fx.dir / "det" / (to_string(strategy) + std::to_string(pass) + ".run");
            auto artifacts = Artifacts::load(cfg);
            write_outputs(cfg, run_pipeline(cfg, artifacts));
            std::ifstream in(cfg.run, std::ios::binary);
            std::stringstream s;
            s << in.rdbuf();
            bytes[pass] = s.str();
        }
        bool const same = !bytes[0].empty() && bytes[0] == bytes[1];
        ok = ok && same;
        detail << to_string(strategy) << "=" << (same ? "identical" : "DIFFERENT") << "(" << bytes[0].size() << "B) ";
    }
    return verdict(ok, detail.str());
}

}  // namespace

int main()
{
    log::set_level(log::Level::off);
    auto const start = Clock::now();
    criterion("call-count-exactness", call_counts);
    criterion("hand-trace-oracle-equivalence", hand_traces);
    criterion("permutation-safety", permutation_safety);
    criterion("bounded-recall-escape", bounded_recall_escape);
    criterion("graph-depth-trend", graph_depth_trend);
    criterion("rm3-recall-gain", rm3_gain);
    criterion("graph-build-correctness", graph_builders);
    criterion("metric-correctness", metrics);
    criterion("overhead", overhead);
    criterion("determinism", determinism);
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << " in "
              << fmt(seconds_since(start), 2) << "s" << std::endl;
    return failures == 0 ? 0 : 1;
}
