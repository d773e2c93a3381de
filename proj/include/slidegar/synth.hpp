#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "slidegar/corpus_store.hpp"
#include "slidegar/dense_index.hpp"

namespace slidegar {

inline constexpr char const *kSynthRng = "mt19937_64";
inline constexpr int kSynthGeneratorVersion = 1;

/// Knobs of a clustered synthetic collection. Every query targets one cluster; its
/// relevant documents share query-specific "topic" terms and an embedding offset, but a
/// `retrieval_gap` fraction of them contain none of the query's terms.
struct SynthSpec {
    std::size_t n_clusters = 20;
    std::size_t docs_per_cluster = 40;
    std::size_t vocab_per_cluster = 30;
    std::size_t shared_vocab = 40;
    std::size_t dim = 32;
    std::size_t n_queries = 20;
    std::size_t relevant_per_query = 10;
    double retrieval_gap = 0.5;
    std::uint64_t seed = 7;

    std::size_t cluster_terms_per_doc = 8;
    std::size_t shared_terms_per_doc = 4;
    std::size_t topic_terms = 3;
    double noise = 0.05;

    /// Throws ConfigError on zero counts, gap outside [0,1), or vocabulary exhaustion.
    void validate() const;

    [[nodiscard]] std::size_t hidden_per_query() const;

    [[nodiscard]] nlohmann::json to_json() const;
    static SynthSpec from_json(nlohmann::json const &j);
};

struct SynthCollection {
    SynthSpec spec;
    std::vector<Document> documents;
    std::vector<Query> queries;
    std::vector<QrelEntry> qrels;  ///< grade 2 = targeted, grade 1 = same-cluster near miss
    EmbeddingFile doc_embeddings;
    EmbeddingFile query_embeddings;  ///< keyed by qid
    std::map<std::string, std::vector<std::string>> hidden;   ///< qid -> relevant docnos sharing no query term
    std::map<std::string, std::vector<std::string>> visible;  ///< qid -> relevant docnos containing the query terms
};

/// Same spec (seed included) always yields the same collection.
SynthCollection generate(SynthSpec const &spec);

/// Writes corpus.tsv, queries.tsv, qrels.txt, embeddings.bin, query_embeddings.bin,
/// hidden.tsv and spec.json into `dir`.
void write_collection(std::filesystem::path const &dir, SynthCollection const &collection);

}  // namespace slidegar
