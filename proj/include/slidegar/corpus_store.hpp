#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slidegar/types.hpp"

namespace slidegar {

struct Document {
    std::string docno;
    std::string text;
};

/// One entry of the dedup report: `dropped` had the same normalized text as `kept`.
struct DedupEntry {
    std::string dropped;
    std::string kept;

    friend bool operator==(DedupEntry const &, DedupEntry const &) = default;
};

/// Immutable docno <-> DocId mapping plus document text.
class CorpusStore {
   public:
    CorpusStore() = default;

    /// Throws ParseError on duplicate or empty docnos and empty texts.
    explicit CorpusStore(std::vector<Document> docs);

    [[nodiscard]] std::size_t size() const noexcept { return docs_.size(); }
    [[nodiscard]] std::string const &docno(DocId id) const { return docs_.at(id.value).docno; }
    [[nodiscard]] std::string const &text(DocId id) const { return docs_.at(id.value).text; }
    [[nodiscard]] std::optional<DocId> find(std::string_view docno) const;
    [[nodiscard]] std::vector<Document> const &documents() const noexcept { return docs_; }

   private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, DocId> by_docno_;
};

struct IngestResult {
    CorpusStore store;
    std::vector<DedupEntry> report;
};

/// Trims, collapses internal whitespace runs to one space. No case folding.
std::string normalize_text(std::string_view text);

bool is_valid_utf8(std::string_view s);

/// Reads `docno<TAB>text` lines, or JSON objects per line when the first byte is `{`.
std::vector<Document> read_documents(std::istream &in);

/// When `dedup` is set, documents with identical normalized text collapse onto the
/// lexicographically smallest docno. Retained documents keep their input order.
IngestResult ingest_corpus(std::istream &in, bool dedup);
IngestResult ingest_corpus(std::vector<Document> records, bool dedup);
IngestResult ingest_corpus_file(std::filesystem::path const &path, bool dedup);

void write_corpus_tsv(std::ostream &out, CorpusStore const &store);
void write_dedup_report(std::ostream &out, std::vector<DedupEntry> const &report);
std::vector<DedupEntry> read_dedup_report(std::istream &in);

/// Same line formats as documents, with `qid` in place of `docno`.
std::vector<Query> read_queries(std::istream &in);
std::vector<Query> read_queries_file(std::filesystem::path const &path);

struct QrelEntry {
    std::string qid;
    std::string docno;
    int grade = 0;
};

/// Standard `qid 0 docno grade` lines. Negative grades are fatal.
std::vector<QrelEntry> read_qrels(std::istream &in);
std::vector<QrelEntry> read_qrels_file(std::filesystem::path const &path);
void write_qrels(std::ostream &out, std::vector<QrelEntry> const &qrels);

using GradeMap = std::unordered_map<DocId, int>;
using QrelTable = std::map<std::string, GradeMap>;

struct MappedQrels {
    QrelTable table;
    std::vector<QrelEntry> absent;  ///< judged docnos unknown to the store
};

/// Remaps judgments of dropped duplicates onto their kept twin; max grade wins.
MappedQrels map_qrels(std::vector<QrelEntry> const &qrels, CorpusStore const &store,
                      std::vector<DedupEntry> const &report = {});

/// Docno-keyed grades per qid, for evaluating run files without a store.
using DocnoGrades = std::unordered_map<std::string, int>;
std::map<std::string, DocnoGrades> qrels_by_docno(std::vector<QrelEntry> const &qrels);

}  // namespace slidegar
