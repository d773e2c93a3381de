#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "slidegar/corpus_store.hpp"
#include "slidegar/types.hpp"

namespace slidegar {

struct Posting {
    DocId doc;
    std::uint32_t tf = 0;

    friend bool operator==(Posting const &, Posting const &) = default;
};

using TermId = std::uint32_t;

/// Term frequency of one term inside one document (forward view).
struct TermCount {
    TermId term = 0;
    std::uint32_t tf = 0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Immutable inverted index with a forward view used by RM3 and graph building.
class InvertedIndex {
   public:
    static constexpr std::uint32_t kFormatVersion = 1;

    InvertedIndex() = default;

    static InvertedIndex build(CorpusStore const &store);

    /// Builds from pre-tokenized documents (DocId = position).
    static InvertedIndex build(std::vector<std::vector<std::string>> const &docs);

    /// Writes terms.dict, postings.bin, doclens.bin and meta.json into `dir`.
    void save(std::filesystem::path const &dir) const;
    static InvertedIndex load(std::filesystem::path const &dir);

    [[nodiscard]] std::size_t doc_count() const noexcept { return doc_lengths_.size(); }
    [[nodiscard]] std::size_t term_count() const noexcept { return terms_.size(); }
    [[nodiscard]] double avg_doc_length() const noexcept { return avg_doc_length_; }
    [[nodiscard]] std::uint32_t doc_length(DocId d) const { return doc_lengths_.at(d.value); }

    [[nodiscard]] std::optional<TermId> term_id(std::string_view term) const;
    [[nodiscard]] std::string const &term(TermId id) const { return terms_.at(id); }
    [[nodiscard]] std::span<Posting const> postings(TermId id) const { return postings_.at(id); }
    [[nodiscard]] std::size_t df(TermId id) const { return postings_.at(id).size(); }

    /// Terms of `d` sorted by TermId.
    [[nodiscard]] std::span<TermCount const> doc_terms(DocId d) const;

    [[nodiscard]] double idf(TermId id) const;

    /// BM25 contribution of one occurrence of `term` in the query to document `d` with frequency `tf`.
    [[nodiscard]] double term_score(TermId id, DocId d, std::uint32_t tf) const;

    [[nodiscard]] Bm25Params const &params() const noexcept { return params_; }

   private:
    void finalize();

    Bm25Params params_;
    std::vector<std::string> terms_;  // sorted
    std::unordered_map<std::string, TermId> term_ids_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    std::vector<std::size_t> forward_offsets_;
    std::vector<TermCount> forward_;
};

/// Weighted query terms; weights are finite and non-negative.
struct ExpandedQuery {
    std::vector<std::pair<std::string, double>> terms;  // sorted by term

    [[nodiscard]] double weight(std::string_view term) const;
    [[nodiscard]] double total_weight() const;
};

struct Rm3Params {
    std::size_t fb_docs = 10;
    std::size_t fb_terms = 10;
    double orig_weight = 0.6;
};

/// Scores with query-term multiplicity; docs scoring 0 are omitted. Ties: DocId asc.
Ranking bm25_retrieve(InvertedIndex const &index, std::string_view query, std::size_t k);
Ranking bm25_retrieve(InvertedIndex const &index, std::span<std::string const> query_tokens, std::size_t k);

/// `feedback` scores may be any finite values (shifted to be non-negative before use).
ExpandedQuery rm3_expand(InvertedIndex const &index, std::string_view query, Ranking const &feedback,
                         Rm3Params const &params = {});

/// BM25 where each term's contribution is scaled by its expansion weight.
Ranking retrieve_expanded(InvertedIndex const &index, ExpandedQuery const &eq, std::size_t k,
                          std::unordered_set<DocId> const &exclude = {});

/// Top-k by `ranks_before` from a dense score accumulator; zero scores skipped.
Ranking select_top(std::span<double const> scores, std::size_t k);

}  // namespace slidegar
