#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slidegar/adaptive_rerank.hpp"
#include "slidegar/corpus_graph.hpp"
#include "slidegar/corpus_store.hpp"
#include "slidegar/dense_index.hpp"
#include "slidegar/eval.hpp"
#include "slidegar/lexical_index.hpp"
#include "slidegar/rankers.hpp"

namespace slidegar {

enum class Retriever { bm25, dense };
enum class Strategy { baseline, slidegar, slidegar_rm3 };
enum class RankerKind { oracle, noisy_oracle, identity, remote };

struct RankerConfig {
    RankerKind kind = RankerKind::oracle;
    double swap_prob = 0.1;
    std::uint64_t seed = 0;
    std::string endpoint;
    std::int64_t timeout_ms = 30000;
    unsigned retries = 3;
};

/// One experiment. Paths are resolved relative to the config file's directory.
struct PipelineConfig {
    std::filesystem::path index;  ///< directory written by `build-index`
    std::filesystem::path queries;
    std::filesystem::path qrels;  ///< needed by oracle rankers
    Retriever retriever = Retriever::bm25;
    std::filesystem::path embeddings;        ///< dense retriever: document vectors
    std::filesystem::path query_embeddings;  ///< dense retriever: vectors keyed by qid
    Strategy strategy = Strategy::slidegar;
    RankerConfig ranker;
    std::filesystem::path graph;  ///< directory written by `build-graph`
    std::size_t k_store = 16;
    std::size_t truncate_k = 16;
    std::size_t window = 20;
    std::size_t step = 10;
    std::size_t budget = 50;
    bool accumulate_frontier = false;
    Rm3Params rm3;
    std::filesystem::path run;        ///< output run file
    std::filesystem::path telemetry;  ///< output JSON-lines, optional
    std::string tag;                  ///< defaults to the strategy name
    unsigned jobs = 1;

    /// Checks cross-field requirements (graph for slidegar, endpoint for remote, ...).
    void validate() const;

    [[nodiscard]] RerankConfig rerank_config() const;

    /// Effective config with every default spelled out; feeding it back reproduces the run.
    [[nodiscard]] nlohmann::json to_json() const;
    static PipelineConfig from_json(nlohmann::json const &j, std::filesystem::path const &base_dir = {});
    static PipelineConfig load(std::filesystem::path const &path);
};

std::string to_string(Strategy s);
std::string to_string(Retriever r);
std::string to_string(RankerKind k);

/// Everything a run reads from disk, loaded once and shared by all queries.
struct Artifacts {
    CorpusStore store;
    std::vector<DedupEntry> dedup;
    InvertedIndex index;
    std::optional<EmbeddingTable> embeddings;
    std::map<std::string, std::vector<float>> query_vectors;
    std::optional<CorpusGraph> graph;
    std::vector<Query> queries;
    std::vector<QrelEntry> qrels;
    QrelTable qrel_table;

    static Artifacts load(PipelineConfig const &config);
};

/// Loads the corpus persisted by `build-index` (corpus.tsv + dedup.jsonl).
IngestResult load_index_corpus(std::filesystem::path const &index_dir);

struct QueryTelemetry {
    std::string qid;
    std::uint64_t llm_calls = 0;
    std::uint64_t degraded = 0;
    double bookkeeping_ms = 0.0;
    double ranker_ms = 0.0;
    std::size_t escaped_docs = 0;

    [[nodiscard]] nlohmann::json to_json() const;
};

struct PipelineOutput {
    RunFile run;
    std::vector<QueryTelemetry> telemetry;  ///< in qid order
};

std::unique_ptr<ListwiseRanker> make_ranker(RankerConfig const &config, QrelTable const &qrels);

/// First stage then reranking for every query; queries run on `config.jobs` threads.
PipelineOutput run_pipeline(PipelineConfig const &config, Artifacts const &artifacts);

/// run file + telemetry (first line `{"config": ...}`, then one line per query).
void write_outputs(PipelineConfig const &config, PipelineOutput const &output);

}  // namespace slidegar
