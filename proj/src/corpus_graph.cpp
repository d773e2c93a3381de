#include "slidegar/corpus_graph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "slidegar/binary_io.hpp"

namespace slidegar {

namespace {

using json = nlohmann::json;

// Rows are independent, so striping them over threads keeps the output identical.
template <typename RowFn>
void for_each_row(std::size_t n, unsigned threads, RowFn const &fn)
{
    if (threads == 0) {
        threads = std::max(1U, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) {
                fn(i);
            }
        });
    }
}

void check_degree(std::size_t k, std::size_t n)
{
    if (k < 1) {
        throw Error("graph degree k must be >= 1");
    }
    if (k >= n) {
        throw Error("graph degree k=" + std::to_string(k) + " needs more than " + std::to_string(k)
                    + " documents, corpus has " + std::to_string(n));
    }
}

void write_row(std::vector<std::uint32_t> &adjacency, std::size_t row, std::size_t k, Ranking const &top)
{
    auto *out = adjacency.data() + row * k;
    std::size_t j = 0;
    for (; j < top.size() && j < k; ++j) {
        out[j] = top[j].id.value;
    }
    for (; j < k; ++j) {
        out[j] = kNoNeighbor;
    }
}

}  // namespace

std::string to_string(SimilaritySource s) { return s == SimilaritySource::lexical ? "lexical" : "dense"; }

SimilaritySource similarity_source_from_string(std::string const &s)
{
    if (s == "lexical") {
        return SimilaritySource::lexical;
    }
    if (s == "dense") {
        return SimilaritySource::dense;
    }
    throw ConfigError("unknown graph source '" + s + "' (expected lexical|dense)");
}

CorpusGraph::CorpusGraph(std::size_t k, std::vector<std::uint32_t> adjacency, SimilaritySource source)
    : k_(k), adjacency_(std::move(adjacency)), source_(source)
{
    if (k_ == 0) {
        throw Error("graph degree k must be >= 1");
    }
    if (adjacency_.size() % k_ != 0) {
        throw Error("graph adjacency size is not a multiple of k");
    }
    auto const n = size();
    for (std::size_t i = 0; i < n; ++i) {
        bool padding = false;
        for (std::size_t j = 0; j < k_; ++j) {
            auto const v = adjacency_[i * k_ + j];
            if (v == kNoNeighbor) {
                padding = true;
                continue;
            }
            if (padding) {
                throw Error("graph row " + std::to_string(i) + ": neighbour after sentinel");
            }
            if (v >= n) {
                throw Error("graph row " + std::to_string(i) + ": neighbour id out of range");
            }
            if (v == i) {
                throw Error("graph row " + std::to_string(i) + ": self loop");
            }
        }
    }
}

void CorpusGraph::write(std::ostream &out) const
{
    json header = {{"version", kFormatVersion},
                   {"k", k_},
                   {"count", size()},
                   {"source", to_string(source_)},
                   {"sentinel", kNoNeighbor}};
    out << header.dump() << '\n';
    for (auto v : adjacency_) {
        io::write_u32(out, v);
    }
}

CorpusGraph CorpusGraph::read(std::istream &in)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("graph file: missing header");
    }
    std::size_t k = 0;
    std::size_t count = 0;
    SimilaritySource source{};
    try {
        auto header = json::parse(line);
        if (header.at("version").get<std::uint32_t>() != kFormatVersion) {
            throw ParseError("graph file: unsupported version");
        }
        k = header.at("k").get<std::size_t>();
        count = header.at("count").get<std::size_t>();
        source = similarity_source_from_string(header.at("source").get<std::string>());
        if (header.contains("sentinel") && header["sentinel"].get<std::uint64_t>() != kNoNeighbor) {
            throw ParseError("graph file: unexpected sentinel value");
        }
    } catch (json::exception const &e) {
        throw ParseError(std::string("graph file: bad header: ") + e.what());
    }
    std::vector<std::uint32_t> adjacency(k * count);
    for (std::size_t i = 0; i < adjacency.size(); ++i) {
        if (!io::read_u32(in, adjacency[i])) {
            throw ParseError("graph file: truncated at row " + std::to_string(i / std::max<std::size_t>(k, 1)));
        }
    }
    try {
        return CorpusGraph(k, std::move(adjacency), source);
    } catch (ParseError const &) {
        throw;
    } catch (Error const &e) {
        throw ParseError(std::string("graph file: ") + e.what());
    }
}

void CorpusGraph::save(std::filesystem::path const &dir, CorpusStore const &store) const
{
    if (store.size() != size()) {
        throw Error("graph/store size mismatch on save");
    }
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "graph.bin", std::ios::binary | std::ios::trunc);
    std::ofstream names(dir / "docnos.txt", std::ios::binary | std::ios::trunc);
    if (!out || !names) {
        throw Error("cannot write graph into " + dir.string());
    }
    write(out);
    for (auto const &d : store.documents()) {
        names << d.docno << '\n';
    }
}

CorpusGraph CorpusGraph::load(std::filesystem::path const &dir, CorpusStore const &store)
{
    std::ifstream in(dir / "graph.bin", std::ios::binary);
    if (!in) {
        throw Error("missing graph file " + (dir / "graph.bin").string());
    }
    auto graph = read(in);
    if (graph.size() != store.size()) {
        throw Error("graph has " + std::to_string(graph.size()) + " rows, corpus has " + std::to_string(store.size()));
    }
    std::ifstream names(dir / "docnos.txt");
    if (names) {
        std::string docno;
        std::uint32_t i = 0;
        while (std::getline(names, docno)) {
            if (i >= store.size() || store.docno(DocId(i)) != docno) {
                throw Error("graph docnos.txt disagrees with corpus at line " + std::to_string(i + 1));
            }
            ++i;
        }
        if (i != store.size()) {
            throw Error("graph docnos.txt is shorter than the corpus");
        }
    }
    return graph;
}

CorpusGraph build_graph_lexical(InvertedIndex const &index, std::size_t k, unsigned threads)
{
    auto const n = index.doc_count();
    check_degree(k, n);
    std::vector<std::uint32_t> adjacency(n * k, kNoNeighbor);
    for_each_row(n, threads, [&](std::size_t i) {
        DocId const self(static_cast<std::uint32_t>(i));
        // Sparse accumulator: docs that share no term can never score above zero.
        std::vector<double> acc(n, 0.0);
        for (auto const &tc : index.doc_terms(self)) {
            for (auto const &p : index.postings(tc.term)) {
                acc[p.doc.value] += tc.tf * index.term_score(tc.term, p.doc, p.tf);
            }
        }
        acc[i] = 0.0;
        write_row(adjacency, i, k, select_top(acc, k));
    });
    return CorpusGraph(k, std::move(adjacency), SimilaritySource::lexical);
}

CorpusGraph build_graph_dense(EmbeddingTable const &table, std::size_t k, unsigned threads)
{
    auto const n = table.size();
    check_degree(k, n);
    std::vector<std::uint32_t> adjacency(n * k, kNoNeighbor);
    for_each_row(n, threads, [&](std::size_t i) {
        DocId const self(static_cast<std::uint32_t>(i));
        auto const q = table.vector(self);
        Ranking cands;
        cands.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                DocId const other(static_cast<std::uint32_t>(j));
                cands.push_back({other, inner_product(q, table.vector(other))});
            }
        }
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), ranks_before);
        cands.resize(k);
        write_row(adjacency, i, k, cands);
    });
    return CorpusGraph(k, std::move(adjacency), SimilaritySource::dense);
}

std::vector<DocId> neighbours(CorpusGraph const &graph, std::span<ScoredSource const> batch, std::size_t truncate_k)
{
    std::vector<ScoredSource> sources(batch.begin(), batch.end());
    std::stable_sort(sources.begin(), sources.end(),
                     [](ScoredSource const &a, ScoredSource const &b) { return a.score > b.score; });
    auto const depth = std::min(truncate_k, graph.k());

    std::unordered_set<std::uint32_t> skip;
    for (auto const &s : sources) {
        skip.insert(s.id.value);
    }
    std::vector<DocId> out;
    for (auto const &s : sources) {
        auto row = graph.row(s.id).first(depth);
        for (auto v : row) {
            if (v == kNoNeighbor) {
                break;
            }
            if (skip.insert(v).second) {
                out.emplace_back(v);
            }
        }
    }
    return out;
}

}  // namespace slidegar
