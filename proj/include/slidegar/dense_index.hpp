#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "slidegar/corpus_store.hpp"
#include "slidegar/types.hpp"

namespace slidegar {

/// Row-major float vectors indexed by DocId.
class EmbeddingTable {
   public:
    EmbeddingTable() = default;

    /// Throws if `data.size()` is not a multiple of `dim` or a value is non-finite.
    EmbeddingTable(std::size_t dim, std::vector<float> data, bool normalized = false);

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
    [[nodiscard]] bool normalized() const noexcept { return normalized_; }
    [[nodiscard]] std::span<float const> vector(DocId d) const
    {
        return std::span<float const>(data_).subspan(std::size_t{d.value} * dim_, dim_);
    }
    [[nodiscard]] std::span<float const> data() const noexcept { return data_; }

   private:
    std::size_t dim_ = 0;
    std::vector<float> data_;
    bool normalized_ = false;
};

/// One keyed record of an embedding file, before mapping onto a store.
struct EmbeddingRecord {
    std::string key;
    std::vector<float> values;
};

struct EmbeddingFile {
    std::size_t dim = 0;
    bool normalized = false;
    std::vector<EmbeddingRecord> records;
};

/// JSON header line `{"dim":D,"count":N,"normalized":b}` then N records of
/// `u32 key length, key bytes, D little-endian f32`.
EmbeddingFile read_embedding_file(std::istream &in);
EmbeddingFile read_embedding_file(std::filesystem::path const &path);
void write_embedding_file(std::ostream &out, EmbeddingFile const &file);
void write_embedding_file(std::filesystem::path const &path, EmbeddingFile const &file);

/// Every store document must have exactly one finite vector. With `normalize`,
/// vectors are scaled to unit length so inner product becomes cosine.
EmbeddingTable load_embeddings(EmbeddingFile const &file, CorpusStore const &store, bool normalize = false);
EmbeddingTable load_embeddings(std::filesystem::path const &path, CorpusStore const &store, bool normalize = false);

/// Re-emits a table in DocId order, keyed by the store's docnos.
EmbeddingFile to_embedding_file(EmbeddingTable const &table, CorpusStore const &store);

double inner_product(std::span<float const> a, std::span<float const> b);

/// Exhaustive inner-product top-k; ties by DocId asc.
Ranking dense_retrieve(EmbeddingTable const &table, std::span<float const> query, std::size_t k);

}  // namespace slidegar
