#include "slidegar/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "slidegar/remote_ranker.hpp"

namespace slidegar {

namespace {

using json = nlohmann::json;

template <typename Enum>
Enum parse_enum(std::string const &value, std::initializer_list<std::pair<char const *, Enum>> options,
                char const *field)
{
    std::string allowed;
    for (auto const &[name, e] : options) {
        if (value == name) {
            return e;
        }
        allowed += allowed.empty() ? name : std::string("|") + name;
    }
    throw ConfigError(std::string(field) + ": unknown value '" + value + "' (expected " + allowed + ")");
}

std::filesystem::path resolve(std::filesystem::path const &base, std::string const &p)
{
    if (p.empty()) {
        return {};
    }
    std::filesystem::path path(p);
    return std::filesystem::absolute(path.is_absolute() || base.empty() ? path : base / path).lexically_normal();
}

double to_ms(std::chrono::nanoseconds ns) { return static_cast<double>(ns.count()) / 1e6; }

// Unknown keys are almost always typos in hand-written configs.
void reject_unknown(json const &j, std::initializer_list<char const *> known, char const *where)
{
    for (auto const &[key, value] : j.items()) {
        if (std::find_if(known.begin(), known.end(), [&](char const *k) { return key == k; }) == known.end()) {
            throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
        }
    }
}

}  // namespace

std::string to_string(Strategy s)
{
    switch (s) {
    case Strategy::baseline: return "baseline";
    case Strategy::slidegar: return "slidegar";
    case Strategy::slidegar_rm3: return "slidegar_rm3";
    }
    return "";
}

std::string to_string(Retriever r) { return r == Retriever::bm25 ? "bm25" : "dense"; }

std::string to_string(RankerKind k)
{
    switch (k) {
    case RankerKind::oracle: return "oracle";
    case RankerKind::noisy_oracle: return "noisy_oracle";
    case RankerKind::identity: return "identity";
    case RankerKind::remote: return "remote";
    }
    return "";
}

void PipelineConfig::validate() const
{
    rerank_config().validate();
    if (index.empty()) {
        throw ConfigError("config: 'index' is required");
    }
    if (queries.empty()) {
        throw ConfigError("config: 'queries' is required");
    }
    if (run.empty()) {
        throw ConfigError("config: 'run' output path is required");
    }
    if (strategy == Strategy::slidegar && graph.empty()) {
        throw ConfigError("config: strategy slidegar requires 'graph'");
    }
    if (truncate_k > k_store) {
        throw ConfigError("config: truncate_k exceeds k_store");
    }
    if (retriever == Retriever::dense && (embeddings.empty() || query_embeddings.empty())) {
        throw ConfigError("config: dense retriever requires 'embeddings' and 'query_embeddings'");
    }
    if ((ranker.kind == RankerKind::oracle || ranker.kind == RankerKind::noisy_oracle) && qrels.empty()) {
        throw ConfigError("config: oracle rankers require 'qrels'");
    }
    if (ranker.kind == RankerKind::remote && ranker.endpoint.empty()) {
        throw ConfigError("config: remote ranker requires 'ranker.endpoint'");
    }
    if (!(rm3.orig_weight >= 0.0 && rm3.orig_weight <= 1.0) || rm3.fb_docs == 0 || rm3.fb_terms == 0) {
        throw ConfigError("config: invalid rm3 parameters");
    }
    if (jobs == 0) {
        throw ConfigError("config: jobs must be >= 1");
    }
}

RerankConfig PipelineConfig::rerank_config() const
{
    RerankConfig cfg;
    cfg.window = window;
    cfg.step = step;
    cfg.budget = budget;
    cfg.truncate_k = truncate_k;
    cfg.accumulate_frontier = accumulate_frontier;
    return cfg;
}

json PipelineConfig::to_json() const
{
    return {{"index", index.string()},
            {"queries", queries.string()},
            {"qrels", qrels.string()},
            {"retriever", to_string(retriever)},
            {"embeddings", embeddings.string()},
            {"query_embeddings", query_embeddings.string()},
            {"strategy", to_string(strategy)},
            {"ranker",
             {{"type", to_string(ranker.kind)},
              {"swap_prob", ranker.swap_prob},
              {"seed", ranker.seed},
              {"endpoint", ranker.endpoint},
              {"timeout_ms", ranker.timeout_ms},
              {"retries", ranker.retries}}},
            {"graph", graph.string()},
            {"k_store", k_store},
            {"truncate_k", truncate_k},
            {"w", window},
            {"b", step},
            {"c", budget},
            {"accumulate_frontier", accumulate_frontier},
            {"rm3", {{"fb_docs", rm3.fb_docs}, {"fb_terms", rm3.fb_terms}, {"orig_weight", rm3.orig_weight}}},
            {"run", run.string()},
            {"telemetry", telemetry.string()},
            {"tag", tag.empty() ? to_string(strategy) : tag},
            {"jobs", jobs}};
}

PipelineConfig PipelineConfig::from_json(json const &j, std::filesystem::path const &base_dir)
{
    try {
        reject_unknown(j,
                       {"index", "queries", "qrels", "retriever", "embeddings", "query_embeddings", "strategy", "ranker",
                        "graph", "k_store", "truncate_k", "w", "b", "c", "accumulate_frontier", "rm3", "run",
                        "telemetry", "tag", "jobs"},
                       "config");
        PipelineConfig c;
        c.index = resolve(base_dir, j.value("index", ""));
        c.queries = resolve(base_dir, j.value("queries", ""));
        c.qrels = resolve(base_dir, j.value("qrels", ""));
        c.retriever = parse_enum<Retriever>(j.value("retriever", "bm25"),
                                            {{"bm25", Retriever::bm25}, {"dense", Retriever::dense}}, "retriever");
        c.embeddings = resolve(base_dir, j.value("embeddings", ""));
        c.query_embeddings = resolve(base_dir, j.value("query_embeddings", ""));
        c.strategy = parse_enum<Strategy>(j.value("strategy", "slidegar"),
                                          {{"baseline", Strategy::baseline},
                                           {"slidegar", Strategy::slidegar},
                                           {"slidegar_rm3", Strategy::slidegar_rm3}},
                                          "strategy");
        if (j.contains("ranker")) {
            auto const &r = j.at("ranker");
            reject_unknown(r, {"type", "swap_prob", "seed", "endpoint", "timeout_ms", "retries"}, "config.ranker");
            c.ranker.kind = parse_enum<RankerKind>(r.value("type", "oracle"),
                                                   {{"oracle", RankerKind::oracle},
                                                    {"noisy_oracle", RankerKind::noisy_oracle},
                                                    {"identity", RankerKind::identity},
                                                    {"remote", RankerKind::remote}},
                                                   "ranker.type");
            c.ranker.swap_prob = r.value("swap_prob", c.ranker.swap_prob);
            c.ranker.seed = r.value("seed", c.ranker.seed);
            c.ranker.endpoint = r.value("endpoint", "");
            c.ranker.timeout_ms = r.value("timeout_ms", c.ranker.timeout_ms);
            c.ranker.retries = r.value("retries", c.ranker.retries);
        }
        c.graph = resolve(base_dir, j.value("graph", ""));
        c.k_store = j.value("k_store", c.k_store);
        c.truncate_k = j.value("truncate_k", c.truncate_k);
        c.window = j.value("w", c.window);
        c.step = j.value("b", c.window / 2);
        c.budget = j.value("c", c.budget);
        c.accumulate_frontier = j.value("accumulate_frontier", false);
        if (j.contains("rm3")) {
            auto const &r = j.at("rm3");
            reject_unknown(r, {"fb_docs", "fb_terms", "orig_weight"}, "config.rm3");
            c.rm3.fb_docs = r.value("fb_docs", c.rm3.fb_docs);
            c.rm3.fb_terms = r.value("fb_terms", c.rm3.fb_terms);
            c.rm3.orig_weight = r.value("orig_weight", c.rm3.orig_weight);
        }
        c.run = resolve(base_dir, j.value("run", ""));
        c.telemetry = resolve(base_dir, j.value("telemetry", ""));
        c.tag = j.value("tag", "");
        c.jobs = j.value("jobs", 1U);
        return c;
    } catch (json::exception const &e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

PipelineConfig PipelineConfig::load(std::filesystem::path const &path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open config " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (json::parse_error const &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

IngestResult load_index_corpus(std::filesystem::path const &index_dir)
{
    auto result = ingest_corpus_file(index_dir / "corpus.tsv", false);
    if (std::ifstream report(index_dir / "dedup.jsonl"); report) {
        result.report = read_dedup_report(report);
    }
    return result;
}

Artifacts Artifacts::load(PipelineConfig const &config)
{
    config.validate();
    Artifacts a;
    auto corpus = load_index_corpus(config.index);
    a.store = std::move(corpus.store);
    a.dedup = std::move(corpus.report);
    a.index = InvertedIndex::load(config.index);
    if (a.index.doc_count() != a.store.size()) {
        throw Error("index " + config.index.string() + " covers " + std::to_string(a.index.doc_count())
                    + " docs but its corpus.tsv has " + std::to_string(a.store.size()));
    }
    if (config.retriever == Retriever::dense) {
        a.embeddings = load_embeddings(config.embeddings, a.store);
        auto qfile = read_embedding_file(config.query_embeddings);
        if (qfile.dim != a.embeddings->dim()) {
            throw ParseError("query embeddings have dim " + std::to_string(qfile.dim) + ", documents have "
                             + std::to_string(a.embeddings->dim()));
        }
        for (auto &rec : qfile.records) {
            a.query_vectors[rec.key] = std::move(rec.values);
        }
    }
    if (config.strategy == Strategy::slidegar) {
        a.graph = CorpusGraph::load(config.graph, a.store);
        if (config.truncate_k > a.graph->k()) {
            throw ConfigError("truncate_k=" + std::to_string(config.truncate_k) + " exceeds the stored graph degree "
                              + std::to_string(a.graph->k()));
        }
    }
    a.queries = read_queries_file(config.queries);
    if (!config.qrels.empty()) {
        a.qrels = read_qrels_file(config.qrels);
        a.qrel_table = map_qrels(a.qrels, a.store, a.dedup).table;
    }
    return a;
}

json QueryTelemetry::to_json() const
{
    return {{"qid", qid},
            {"llm_calls", llm_calls},
            {"degraded", degraded},
            {"bookkeeping_ms", bookkeeping_ms},
            {"ranker_ms", ranker_ms},
            {"escaped_docs", escaped_docs}};
}

std::unique_ptr<ListwiseRanker> make_ranker(RankerConfig const &config, QrelTable const &qrels)
{
    switch (config.kind) {
    case RankerKind::oracle: return std::make_unique<OracleRanker>(qrels);
    case RankerKind::noisy_oracle: return std::make_unique<NoisyOracleRanker>(qrels, config.swap_prob, config.seed);
    case RankerKind::identity: return std::make_unique<IdentityRanker>();
    case RankerKind::remote: {
        RemoteRankerOptions options;
        options.endpoint = config.endpoint;
        options.timeout = std::chrono::milliseconds(config.timeout_ms);
        options.retries = config.retries;
        return std::make_unique<RemoteRanker>(options);
    }
    }
    throw ConfigError("unknown ranker kind");
}

PipelineOutput run_pipeline(PipelineConfig const &config, Artifacts const &artifacts)
{
    config.validate();
    auto const cfg = config.rerank_config();
    auto ranker = make_ranker(config.ranker, artifacts.qrel_table);

    struct Slot {
        std::vector<RunEntry> entries;
        QueryTelemetry telemetry;
    };
    std::vector<Slot> slots(artifacts.queries.size());

    auto process = [&](std::size_t qi) {
        auto const &query = artifacts.queries[qi];
        Ranking initial;
        if (config.retriever == Retriever::bm25) {
            initial = bm25_retrieve(artifacts.index, query.text, cfg.budget);
        } else {
            auto it = artifacts.query_vectors.find(query.qid);
            if (it == artifacts.query_vectors.end()) {
                throw Error("no query embedding for qid " + query.qid);
            }
            initial = dense_retrieve(*artifacts.embeddings, it->second, cfg.budget);
        }
        auto &slot = slots[qi];
        slot.telemetry.qid = query.qid;
        if (initial.empty()) {
            return;
        }
        RerankResult result;
        switch (config.strategy) {
        case Strategy::baseline: result = sliding_window(query, initial, *ranker, artifacts.store, cfg); break;
        case Strategy::slidegar:
            result = slidegar(query, initial, *ranker, *artifacts.graph, artifacts.store, cfg);
            break;
        case Strategy::slidegar_rm3:
            result = slidegar_rm3(query, initial, *ranker, artifacts.index, artifacts.store, cfg, config.rm3);
            break;
        }
        for (auto const &sd : result.ranking) {
            slot.entries.push_back({artifacts.store.docno(sd.id), sd.score});
        }
        slot.telemetry.llm_calls = result.counter.calls;
        slot.telemetry.degraded = result.counter.degraded;
        slot.telemetry.bookkeeping_ms = to_ms(result.bookkeeping);
        slot.telemetry.ranker_ms = to_ms(result.counter.ranker_time);
        slot.telemetry.escaped_docs = result.escaped;
    };

    auto const jobs = std::max<std::size_t>(1, std::min<std::size_t>(config.jobs, slots.size()));
    if (jobs == 1) {
        for (std::size_t i = 0; i < slots.size(); ++i) {
            process(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        {
            std::vector<std::jthread> workers;
            for (std::size_t t = 0; t < jobs; ++t) {
                workers.emplace_back([&] {
                    for (std::size_t i = next++; i < slots.size(); i = next++) {
                        try {
                            process(i);
                        } catch (...) {
                            std::lock_guard lock(failure_mutex);
                            if (!failure) {
                                failure = std::current_exception();
                            }
                            next = slots.size();
                        }
                    }
                });
            }
        }
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    PipelineOutput out;
    out.run.tag = config.tag.empty() ? to_string(config.strategy) : config.tag;
    for (auto &slot : slots) {
        if (!slot.entries.empty()) {
            out.run.queries[slot.telemetry.qid] = std::move(slot.entries);
        }
        out.telemetry.push_back(std::move(slot.telemetry));
    }
    std::sort(out.telemetry.begin(), out.telemetry.end(),
              [](QueryTelemetry const &a, QueryTelemetry const &b) { return a.qid < b.qid; });
    return out;
}

void write_outputs(PipelineConfig const &config, PipelineOutput const &output)
{
    write_run_file(config.run, output.run);
    if (config.telemetry.empty()) {
        return;
    }
    if (config.telemetry.has_parent_path()) {
        std::filesystem::create_directories(config.telemetry.parent_path());
    }
    std::ofstream out(config.telemetry, std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + config.telemetry.string());
    }
    out << json{{"config", config.to_json()}}.dump() << '\n';
    for (auto const &t : output.telemetry) {
        out << t.to_json().dump() << '\n';
    }
}

}  // namespace slidegar
