#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "slidegar/corpus_store.hpp"
#include "slidegar/dense_index.hpp"
#include "slidegar/lexical_index.hpp"
#include "slidegar/types.hpp"

namespace slidegar {

enum class SimilaritySource { lexical, dense };

std::string to_string(SimilaritySource s);
SimilaritySource similarity_source_from_string(std::string const &s);

/// Fixed-degree k-NN adjacency. Row i holds DocId i's neighbours, most similar first,
/// padded at the end with kNoNeighbor.
class CorpusGraph {
   public:
    static constexpr std::uint32_t kFormatVersion = 1;

    CorpusGraph() = default;
    CorpusGraph(std::size_t k, std::vector<std::uint32_t> adjacency, SimilaritySource source);

    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] std::size_t size() const noexcept { return k_ == 0 ? 0 : adjacency_.size() / k_; }
    [[nodiscard]] SimilaritySource source() const noexcept { return source_; }

    /// O(1): a view of the fixed-width row, sentinels included.
    [[nodiscard]] std::span<std::uint32_t const> row(DocId d) const
    {
        return std::span<std::uint32_t const>(adjacency_).subspan(std::size_t{d.value} * k_, k_);
    }

    [[nodiscard]] std::span<std::uint32_t const> adjacency() const noexcept { return adjacency_; }

    /// Header line `{"version":1,"k":..,"count":..,"source":..,"sentinel":..}` then
    /// `count` rows of k little-endian u32.
    void write(std::ostream &out) const;
    static CorpusGraph read(std::istream &in);

    /// Writes `graph.bin` and `docnos.txt` (one docno per line in DocId order) into `dir`.
    void save(std::filesystem::path const &dir, CorpusStore const &store) const;
    /// Loads `graph.bin` and checks `docnos.txt` agrees with `store`.
    static CorpusGraph load(std::filesystem::path const &dir, CorpusStore const &store);

   private:
    std::size_t k_ = 0;
    std::vector<std::uint32_t> adjacency_;
    SimilaritySource source_ = SimilaritySource::lexical;
};

/// A ranked batch member and its pseudo-score.
struct ScoredSource {
    DocId id;
    double score = 0.0;
};

/// Each document's text issued as a BM25 query; neighbours are the top-k other documents
/// with a positive score. Only documents sharing a term are ever scored. `threads` = 0
/// picks the hardware concurrency.
CorpusGraph build_graph_lexical(InvertedIndex const &index, std::size_t k, unsigned threads = 1);

/// Inner-product top-k over all other documents.
CorpusGraph build_graph_dense(EmbeddingTable const &table, std::size_t k, unsigned threads = 1);

/// Candidates from the first `truncate_k` neighbours of each batch document, ordered by
/// source pseudo-score desc then neighbour position asc. A candidate reachable from
/// several sources keeps its earliest position. Batch members and sentinels are skipped.
std::vector<DocId> neighbours(CorpusGraph const &graph, std::span<ScoredSource const> batch, std::size_t truncate_k);

}  // namespace slidegar
