#include "slidegar/dense_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "slidegar/binary_io.hpp"

namespace slidegar {

namespace {

using json = nlohmann::json;

constexpr std::uint32_t kMaxKeyLength = 1U << 20;

void normalize_in_place(std::span<float> v)
{
    double norm = 0.0;
    for (float x : v) {
        norm += static_cast<double>(x) * x;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (auto &x : v) {
            x = static_cast<float>(x / norm);
        }
    }
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim, std::vector<float> data, bool normalized)
    : dim_(dim), data_(std::move(data)), normalized_(normalized)
{
    if (dim_ == 0) {
        throw Error("embedding dim must be >= 1");
    }
    if (data_.size() % dim_ != 0) {
        throw Error("embedding data size is not a multiple of dim");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw Error("non-finite embedding value in row " + std::to_string(i / dim_));
        }
    }
}

EmbeddingFile read_embedding_file(std::istream &in)
{
    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw ParseError("embedding file: missing header");
    }
    EmbeddingFile file;
    std::size_t count = 0;
    try {
        auto header = json::parse(header_line);
        file.dim = header.at("dim").get<std::size_t>();
        count = header.at("count").get<std::size_t>();
        file.normalized = header.value("normalized", false);
    } catch (json::exception const &e) {
        throw ParseError(std::string("embedding file: bad header: ") + e.what());
    }
    if (file.dim == 0) {
        throw ParseError("embedding file: dim must be >= 1");
    }
    file.records.reserve(count);
    for (std::size_t r = 0; r < count; ++r) {
        auto const where = "embedding record " + std::to_string(r);
        std::uint32_t key_len = 0;
        if (!io::read_u32(in, key_len)) {
            throw ParseError(where + ": truncated file (expected " + std::to_string(count) + " records)");
        }
        if (key_len == 0 || key_len > kMaxKeyLength) {
            throw ParseError(where + ": bad docno length " + std::to_string(key_len));
        }
        EmbeddingRecord rec;
        rec.key.resize(key_len);
        if (!in.read(rec.key.data(), key_len)) {
            throw ParseError(where + ": truncated docno");
        }
        rec.values.resize(file.dim);
        for (auto &v : rec.values) {
            if (!io::read_f32(in, v)) {
                throw ParseError(where + " (" + rec.key + "): truncated vector, dim mismatch");
            }
            if (!std::isfinite(v)) {
                throw ParseError(where + " (" + rec.key + "): non-finite value");
            }
        }
        file.records.push_back(std::move(rec));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw ParseError("embedding file: trailing bytes after " + std::to_string(count) + " records, dim mismatch?");
    }
    return file;
}

EmbeddingFile read_embedding_file(std::filesystem::path const &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    try {
        return read_embedding_file(in);
    } catch (ParseError const &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_embedding_file(std::ostream &out, EmbeddingFile const &file)
{
    json header = {{"dim", file.dim}, {"count", file.records.size()}, {"normalized", file.normalized}};
    out << header.dump() << '\n';
    for (auto const &rec : file.records) {
        if (rec.values.size() != file.dim) {
            throw Error("write_embedding_file: record " + rec.key + " has wrong dim");
        }
        io::write_u32(out, static_cast<std::uint32_t>(rec.key.size()));
        out.write(rec.key.data(), static_cast<std::streamsize>(rec.key.size()));
        for (float v : rec.values) {
            io::write_f32(out, v);
        }
    }
}

void write_embedding_file(std::filesystem::path const &path, EmbeddingFile const &file)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    write_embedding_file(out, file);
}

EmbeddingTable load_embeddings(EmbeddingFile const &file, CorpusStore const &store, bool normalize)
{
    auto const dim = file.dim;
    std::vector<float> data(store.size() * dim);
    std::vector<bool> filled(store.size(), false);
    for (std::size_t r = 0; r < file.records.size(); ++r) {
        auto const &rec = file.records[r];
        auto const where = "embedding record " + std::to_string(r) + " (" + rec.key + ")";
        auto id = store.find(rec.key);
        if (!id) {
            throw ParseError(where + ": docno not in corpus");
        }
        if (filled[id->value]) {
            throw ParseError(where + ": duplicate docno");
        }
        if (rec.values.size() != dim) {
            throw ParseError(where + ": dim mismatch");
        }
        for (float v : rec.values) {
            if (!std::isfinite(v)) {
                throw ParseError(where + ": non-finite value");
            }
        }
        std::copy(rec.values.begin(), rec.values.end(), data.begin() + static_cast<std::ptrdiff_t>(id->value * dim));
        filled[id->value] = true;
    }
    for (std::size_t i = 0; i < filled.size(); ++i) {
        if (!filled[i]) {
            throw ParseError("embedding file has no vector for docno " + store.docno(DocId(static_cast<std::uint32_t>(i))));
        }
    }
    if (normalize) {
        for (std::size_t i = 0; i < store.size(); ++i) {
            normalize_in_place(std::span<float>(data).subspan(i * dim, dim));
        }
    }
    return EmbeddingTable(dim, std::move(data), normalize || file.normalized);
}

EmbeddingTable load_embeddings(std::filesystem::path const &path, CorpusStore const &store, bool normalize)
{
    return load_embeddings(read_embedding_file(path), store, normalize);
}

EmbeddingFile to_embedding_file(EmbeddingTable const &table, CorpusStore const &store)
{
    EmbeddingFile file;
    file.dim = table.dim();
    file.normalized = table.normalized();
    for (std::size_t i = 0; i < table.size(); ++i) {
        DocId const d(static_cast<std::uint32_t>(i));
        auto v = table.vector(d);
        file.records.push_back({store.docno(d), std::vector<float>(v.begin(), v.end())});
    }
    return file;
}

double inner_product(std::span<float const> a, std::span<float const> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return s;
}

Ranking dense_retrieve(EmbeddingTable const &table, std::span<float const> query, std::size_t k)
{
    if (k < 1) {
        throw Error("dense_retrieve: k must be >= 1");
    }
    if (query.size() != table.dim()) {
        throw Error("dense_retrieve: query has dim " + std::to_string(query.size()) + ", table has "
                    + std::to_string(table.dim()));
    }
    Ranking all;
    all.reserve(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        DocId const d(static_cast<std::uint32_t>(i));
        all.push_back({d, inner_product(table.vector(d), query)});
    }
    auto const n = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), ranks_before);
    all.resize(n);
    return all;
}

}  // namespace slidegar
