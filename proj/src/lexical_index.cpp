#include "slidegar/lexical_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "slidegar/binary_io.hpp"
#include "slidegar/tokenizer.hpp"

namespace slidegar {

namespace {

using json = nlohmann::json;

std::ofstream open_out(std::filesystem::path const &path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

std::ifstream open_in(std::filesystem::path const &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("missing index file " + path.string());
    }
    return in;
}

}  // namespace

InvertedIndex InvertedIndex::build(CorpusStore const &store)
{
    std::vector<std::vector<std::string>> docs;
    docs.reserve(store.size());
    for (auto const &d : store.documents()) {
        docs.push_back(tokenize(d.text));
    }
    return build(docs);
}

InvertedIndex InvertedIndex::build(std::vector<std::vector<std::string>> const &docs)
{
    std::map<std::string, std::vector<Posting>> by_term;
    InvertedIndex idx;
    idx.doc_lengths_.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        std::map<std::string_view, std::uint32_t> tf;
        for (auto const &t : docs[i]) {
            ++tf[t];
        }
        for (auto const &[term, count] : tf) {
            by_term[std::string(term)].push_back({DocId(static_cast<std::uint32_t>(i)), count});
        }
        idx.doc_lengths_.push_back(static_cast<std::uint32_t>(docs[i].size()));
    }
    idx.terms_.reserve(by_term.size());
    idx.postings_.reserve(by_term.size());
    for (auto &[term, plist] : by_term) {
        idx.terms_.push_back(term);
        idx.postings_.push_back(std::move(plist));
    }
    idx.finalize();
    return idx;
}

void InvertedIndex::finalize()
{
    term_ids_.clear();
    term_ids_.reserve(terms_.size());
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        term_ids_.emplace(terms_[t], static_cast<TermId>(t));
    }
    std::uint64_t total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), std::uint64_t{0});
    avg_doc_length_ = doc_lengths_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(doc_lengths_.size());

    // forward view: terms per doc, in TermId order because terms are visited in order
    std::vector<std::size_t> counts(doc_lengths_.size() + 1, 0);
    for (auto const &plist : postings_) {
        for (auto const &p : plist) {
            ++counts[p.doc.value + 1];
        }
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    forward_offsets_ = counts;
    forward_.assign(counts.back(), {});
    std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
    for (std::size_t t = 0; t < postings_.size(); ++t) {
        for (auto const &p : postings_[t]) {
            forward_[cursor[p.doc.value]++] = {static_cast<TermId>(t), p.tf};
        }
    }
}

std::optional<TermId> InvertedIndex::term_id(std::string_view term) const
{
    auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::span<TermCount const> InvertedIndex::doc_terms(DocId d) const
{
    auto const begin = forward_offsets_.at(d.value);
    auto const end = forward_offsets_.at(d.value + 1);
    return std::span<TermCount const>(forward_).subspan(begin, end - begin);
}

double InvertedIndex::idf(TermId id) const
{
    auto const n = static_cast<double>(doc_count());
    auto const df = static_cast<double>(postings_.at(id).size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double InvertedIndex::term_score(TermId id, DocId d, std::uint32_t tf) const
{
    auto const f = static_cast<double>(tf);
    double const norm = avg_doc_length_ > 0.0 ? static_cast<double>(doc_lengths_[d.value]) / avg_doc_length_ : 0.0;
    return idf(id) * f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * norm));
}

void InvertedIndex::save(std::filesystem::path const &dir) const
{
    std::filesystem::create_directories(dir);
    auto dict = open_out(dir / "terms.dict");
    auto post = open_out(dir / "postings.bin");
    std::uint64_t offset = 0;
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        dict << terms_[t] << '\t' << offset << '\t' << postings_[t].size() << '\n';
        std::uint32_t prev = 0;
        for (auto const &p : postings_[t]) {
            io::write_u32(post, p.doc.value - prev);
            io::write_u32(post, p.tf);
            prev = p.doc.value;
        }
        offset += postings_[t].size();
    }
    auto lens = open_out(dir / "doclens.bin");
    for (auto len : doc_lengths_) {
        io::write_u32(lens, len);
    }
    json meta = {{"format_version", kFormatVersion},
                 {"doc_count", doc_count()},
                 {"term_count", term_count()},
                 {"avgdl", avg_doc_length_},
                 {"k1", params_.k1},
                 {"b", params_.b}};
    open_out(dir / "meta.json") << meta.dump(2) << '\n';
}

InvertedIndex InvertedIndex::load(std::filesystem::path const &dir)
{
    InvertedIndex idx;
    json meta;
    try {
        meta = json::parse(open_in(dir / "meta.json"));
    } catch (json::parse_error const &e) {
        throw ParseError((dir / "meta.json").string() + ": " + e.what());
    }
    if (meta.value("format_version", 0U) != kFormatVersion) {
        throw ParseError("unsupported index format version in " + (dir / "meta.json").string());
    }
    auto const doc_count = meta.at("doc_count").get<std::size_t>();
    idx.params_.k1 = meta.value("k1", 1.2);
    idx.params_.b = meta.value("b", 0.75);

    auto lens = open_in(dir / "doclens.bin");
    idx.doc_lengths_.resize(doc_count);
    for (auto &len : idx.doc_lengths_) {
        if (!io::read_u32(lens, len)) {
            throw ParseError("doclens.bin truncated");
        }
    }

    auto dict = open_in(dir / "terms.dict");
    auto post = open_in(dir / "postings.bin");
    std::string line;
    std::uint64_t expected_offset = 0;
    while (std::getline(dict, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::string term;
        std::uint64_t offset = 0;
        std::size_t df = 0;
        if (!std::getline(fields, term, '\t') || !(fields >> offset >> df) || offset != expected_offset) {
            throw ParseError("terms.dict: bad entry '" + line + "'");
        }
        if (!idx.terms_.empty() && !(idx.terms_.back() < term)) {
            throw ParseError("terms.dict: terms not strictly sorted at '" + term + "'");
        }
        std::vector<Posting> plist(df);
        std::uint32_t doc = 0;
        for (std::size_t i = 0; i < df; ++i) {
            std::uint32_t delta = 0;
            std::uint32_t tf = 0;
            if (!io::read_u32(post, delta) || !io::read_u32(post, tf)) {
                throw ParseError("postings.bin truncated");
            }
            if (i > 0 && delta == 0) {
                throw ParseError("postings.bin: duplicate doc in list of '" + term + "'");
            }
            doc += delta;
            if (doc >= doc_count) {
                throw ParseError("postings.bin: doc id out of range in list of '" + term + "'");
            }
            plist[i] = {DocId(doc), tf};
        }
        idx.terms_.push_back(std::move(term));
        idx.postings_.push_back(std::move(plist));
        expected_offset += df;
    }
    idx.finalize();
    return idx;
}

Ranking select_top(std::span<double const> scores, std::size_t k)
{
    Ranking all;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > 0.0) {
            all.push_back({DocId(static_cast<std::uint32_t>(i)), scores[i]});
        }
    }
    auto const n = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), ranks_before);
    all.resize(n);
    return all;
}

Ranking bm25_retrieve(InvertedIndex const &index, std::span<std::string const> query_tokens, std::size_t k)
{
    if (k == 0) {
        throw Error("bm25_retrieve: k must be >= 1");
    }
    std::map<TermId, std::uint32_t> qtf;
    for (auto const &tok : query_tokens) {
        if (auto id = index.term_id(tok)) {
            ++qtf[*id];
        }
    }
    if (qtf.empty()) {
        return {};
    }
    std::vector<double> acc(index.doc_count(), 0.0);
    for (auto const &[term, count] : qtf) {
        for (auto const &p : index.postings(term)) {
            acc[p.doc.value] += count * index.term_score(term, p.doc, p.tf);
        }
    }
    return select_top(acc, k);
}

Ranking bm25_retrieve(InvertedIndex const &index, std::string_view query, std::size_t k)
{
    auto tokens = tokenize(query);
    return bm25_retrieve(index, tokens, k);
}

double ExpandedQuery::weight(std::string_view term) const
{
    auto it = std::lower_bound(terms.begin(), terms.end(), term,
                               [](auto const &entry, std::string_view t) { return entry.first < t; });
    return it != terms.end() && it->first == term ? it->second : 0.0;
}

double ExpandedQuery::total_weight() const
{
    double s = 0.0;
    for (auto const &[t, w] : terms) {
        s += w;
    }
    return s;
}

ExpandedQuery rm3_expand(InvertedIndex const &index, std::string_view query, Ranking const &feedback,
                         Rm3Params const &params)
{
    if (feedback.empty()) {
        throw Error("rm3_expand: empty feedback");
    }
    if (params.fb_docs == 0 || params.fb_terms == 0 || !(params.orig_weight >= 0.0 && params.orig_weight <= 1.0)) {
        throw Error("rm3_expand: invalid parameters");
    }
    auto const n_fb = std::min(params.fb_docs, feedback.size());

    std::vector<double> doc_weight(n_fb);
    double min_score = feedback[0].score;
    for (std::size_t i = 0; i < n_fb; ++i) {
        if (!std::isfinite(feedback[i].score)) {
            throw Error("rm3_expand: non-finite feedback score");
        }
        min_score = std::min(min_score, feedback[i].score);
    }
    double const shift = min_score < 0.0 ? -min_score : 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n_fb; ++i) {
        doc_weight[i] = feedback[i].score + shift;
        total += doc_weight[i];
    }
    for (auto &w : doc_weight) {
        w = total > 0.0 ? w / total : 1.0 / static_cast<double>(n_fb);
    }

    std::map<TermId, double> relevance;
    for (std::size_t i = 0; i < n_fb; ++i) {
        auto const d = feedback[i].id;
        auto const len = index.doc_length(d);
        if (len == 0) {
            continue;
        }
        for (auto const &tc : index.doc_terms(d)) {
            relevance[tc.term] += doc_weight[i] * static_cast<double>(tc.tf) / static_cast<double>(len);
        }
    }

    std::vector<std::pair<std::string, double>> rm;
    rm.reserve(relevance.size());
    for (auto const &[t, w] : relevance) {
        if (w > 0.0 && !is_stopword(index.term(t))) {
            rm.emplace_back(index.term(t), w);
        }
    }
    auto const keep = std::min(params.fb_terms, rm.size());
    std::partial_sort(rm.begin(), rm.begin() + static_cast<std::ptrdiff_t>(keep), rm.end(), [](auto const &a, auto const &b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    rm.resize(keep);
    double rm_total = 0.0;
    for (auto const &[t, w] : rm) {
        rm_total += w;
    }

    std::map<std::string, double> mixed;
    auto const query_tokens = tokenize(query);
    if (!query_tokens.empty()) {
        double const uniform = 1.0 / static_cast<double>(query_tokens.size());
        for (auto const &t : query_tokens) {
            mixed[t] += params.orig_weight * uniform;
        }
    }
    double const rm_share = query_tokens.empty() ? 1.0 : 1.0 - params.orig_weight;
    if (rm_total > 0.0) {
        for (auto const &[t, w] : rm) {
            mixed[t] += rm_share * w / rm_total;
        }
    }

    ExpandedQuery eq;
    for (auto &[t, w] : mixed) {
        if (w > 0.0) {
            eq.terms.emplace_back(t, w);
        }
    }
    if (eq.terms.empty()) {
        throw Error("rm3_expand: expansion produced no weighted terms");
    }
    return eq;
}

Ranking retrieve_expanded(InvertedIndex const &index, ExpandedQuery const &eq, std::size_t k,
                          std::unordered_set<DocId> const &exclude)
{
    if (k == 0) {
        throw Error("retrieve_expanded: k must be >= 1");
    }
    std::vector<double> acc(index.doc_count(), 0.0);
    for (auto const &[term, weight] : eq.terms) {
        auto id = index.term_id(term);
        if (!id || weight <= 0.0) {
            continue;
        }
        for (auto const &p : index.postings(*id)) {
            acc[p.doc.value] += weight * index.term_score(*id, p.doc, p.tf);
        }
    }
    for (auto d : exclude) {
        if (d.value < acc.size()) {
            acc[d.value] = 0.0;
        }
    }
    return select_top(acc, k);
}

}  // namespace slidegar
