#include "slidegar/corpus_store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace slidegar {

namespace {

using json = nlohmann::json;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s)
{
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

[[noreturn]] void fail_at(std::size_t line, std::string const &what)
{
    throw ParseError("line " + std::to_string(line) + ": " + what);
}

struct KeyedLine {
    std::string key;
    std::string text;
};

// Shared reader for corpus and query files.
std::vector<KeyedLine> read_keyed_lines(std::istream &in, char const *key_field)
{
    std::vector<KeyedLine> out;
    bool const json_lines = in.peek() == '{';
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        if (!is_valid_utf8(line)) {
            fail_at(lineno, "invalid UTF-8");
        }
        KeyedLine rec;
        if (json_lines) {
            json obj;
            try {
                obj = json::parse(line);
            } catch (json::parse_error const &e) {
                fail_at(lineno, std::string("malformed JSON: ") + e.what());
            }
            if (!obj.is_object() || !obj.contains(key_field) || !obj.contains("text") || !obj[key_field].is_string()
                || !obj["text"].is_string()) {
                fail_at(lineno, std::string("record needs string fields '") + key_field + "' and 'text'");
            }
            rec.key = obj[key_field].get<std::string>();
            rec.text = obj["text"].get<std::string>();
        } else {
            auto tab = line.find('\t');
            if (tab == std::string::npos) {
                fail_at(lineno, "missing tab separator");
            }
            rec.key = line.substr(0, tab);
            rec.text = line.substr(tab + 1);
        }
        if (trim(rec.key).empty()) {
            fail_at(lineno, std::string("empty ") + key_field);
        }
        if (trim(rec.text).empty()) {
            fail_at(lineno, "empty text");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::ifstream open_or_throw(std::filesystem::path const &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return in;
}

}  // namespace

CorpusStore::CorpusStore(std::vector<Document> docs) : docs_(std::move(docs))
{
    by_docno_.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        auto const &d = docs_[i];
        if (d.docno.empty()) {
            throw ParseError("document " + std::to_string(i) + ": empty docno");
        }
        if (trim(d.text).empty()) {
            throw ParseError("document " + d.docno + ": empty text");
        }
        if (!by_docno_.emplace(d.docno, DocId(static_cast<std::uint32_t>(i))).second) {
            throw ParseError("duplicate docno " + d.docno);
        }
    }
}

std::optional<DocId> CorpusStore::find(std::string_view docno) const
{
    auto it = by_docno_.find(std::string(docno));
    if (it == by_docno_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string normalize_text(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : trim(text)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

bool is_valid_utf8(std::string_view s)
{
    std::size_t i = 0;
    while (i < s.size()) {
        auto const c = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        }
        if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) {
            return false;
        }
        for (std::size_t j = 1; j < len; ++j) {
            auto const cc = static_cast<unsigned char>(s[i + j]);
            if ((cc & 0xC0) != 0x80) {
                return false;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        // overlong forms, surrogates, out of range
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) || cp > 0x10FFFF
            || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += len;
    }
    return true;
}

std::vector<Document> read_documents(std::istream &in)
{
    std::vector<Document> docs;
    for (auto &rec : read_keyed_lines(in, "docno")) {
        docs.push_back({std::move(rec.key), std::move(rec.text)});
    }
    return docs;
}

IngestResult ingest_corpus(std::vector<Document> records, bool dedup)
{
    {
        std::unordered_map<std::string_view, std::size_t> seen;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!seen.emplace(records[i].docno, i).second) {
                throw ParseError("record " + std::to_string(i + 1) + ": duplicate docno " + records[i].docno);
            }
        }
    }
    IngestResult result;
    if (!dedup) {
        result.store = CorpusStore(std::move(records));
        return result;
    }

    // normalized text -> index of the record holding the smallest docno
    std::unordered_map<std::string, std::size_t> representative;
    std::vector<std::string> normalized(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        normalized[i] = normalize_text(records[i].text);
        auto [it, inserted] = representative.emplace(normalized[i], i);
        if (!inserted && records[i].docno < records[it->second].docno) {
            it->second = i;
        }
    }
    std::vector<Document> kept;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto const rep = representative.at(normalized[i]);
        if (rep == i) {
            continue;
        }
        result.report.push_back({records[i].docno, records[rep].docno});
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (representative.at(normalized[i]) == i) {
            kept.push_back(std::move(records[i]));
        }
    }
    std::sort(result.report.begin(), result.report.end(),
              [](DedupEntry const &a, DedupEntry const &b) { return a.dropped < b.dropped; });
    result.store = CorpusStore(std::move(kept));
    return result;
}

IngestResult ingest_corpus(std::istream &in, bool dedup) { return ingest_corpus(read_documents(in), dedup); }

IngestResult ingest_corpus_file(std::filesystem::path const &path, bool dedup)
{
    auto in = open_or_throw(path);
    try {
        return ingest_corpus(in, dedup);
    } catch (ParseError const &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_corpus_tsv(std::ostream &out, CorpusStore const &store)
{
    for (auto const &d : store.documents()) {
        std::string text = d.text;
        std::replace_if(text.begin(), text.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
        out << d.docno << '\t' << text << '\n';
    }
}

void write_dedup_report(std::ostream &out, std::vector<DedupEntry> const &report)
{
    for (auto const &e : report) {
        out << json{{"dropped", e.dropped}, {"kept", e.kept}}.dump() << '\n';
    }
}

std::vector<DedupEntry> read_dedup_report(std::istream &in)
{
    std::vector<DedupEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        try {
            auto obj = json::parse(line);
            out.push_back({obj.at("dropped").get<std::string>(), obj.at("kept").get<std::string>()});
        } catch (json::exception const &e) {
            fail_at(lineno, std::string("bad dedup record: ") + e.what());
        }
    }
    return out;
}

std::vector<Query> read_queries(std::istream &in)
{
    std::vector<Query> out;
    std::unordered_map<std::string, std::size_t> seen;
    for (auto &rec : read_keyed_lines(in, "qid")) {
        if (!seen.emplace(rec.key, out.size()).second) {
            throw ParseError("duplicate qid " + rec.key);
        }
        out.push_back({std::move(rec.key), std::move(rec.text)});
    }
    return out;
}

std::vector<Query> read_queries_file(std::filesystem::path const &path)
{
    auto in = open_or_throw(path);
    try {
        return read_queries(in);
    } catch (ParseError const &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::vector<QrelEntry> read_qrels(std::istream &in)
{
    std::vector<QrelEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::string qid, iter, docno, grade_str, extra;
        if (!(fields >> qid >> iter >> docno >> grade_str) || (fields >> extra)) {
            fail_at(lineno, "expected 'qid 0 docno grade'");
        }
        int grade = 0;
        try {
            std::size_t pos = 0;
            grade = std::stoi(grade_str, &pos);
            if (pos != grade_str.size()) {
                throw std::invalid_argument(grade_str);
            }
        } catch (std::exception const &) {
            fail_at(lineno, "grade is not an integer: " + grade_str);
        }
        if (grade < 0) {
            fail_at(lineno, "negative grade " + grade_str);
        }
        out.push_back({std::move(qid), std::move(docno), grade});
    }
    return out;
}

std::vector<QrelEntry> read_qrels_file(std::filesystem::path const &path)
{
    auto in = open_or_throw(path);
    try {
        return read_qrels(in);
    } catch (ParseError const &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_qrels(std::ostream &out, std::vector<QrelEntry> const &qrels)
{
    for (auto const &q : qrels) {
        out << q.qid << " 0 " << q.docno << ' ' << q.grade << '\n';
    }
}

MappedQrels map_qrels(std::vector<QrelEntry> const &qrels, CorpusStore const &store,
                      std::vector<DedupEntry> const &report)
{
    std::unordered_map<std::string_view, std::string_view> kept_for;
    for (auto const &e : report) {
        kept_for.emplace(e.dropped, e.kept);
    }
    MappedQrels out;
    for (auto const &q : qrels) {
        if (q.grade < 0) {
            throw ParseError("negative grade for " + q.qid + "/" + q.docno);
        }
        std::string_view docno = q.docno;
        if (auto it = kept_for.find(docno); it != kept_for.end()) {
            docno = it->second;
        }
        auto id = store.find(docno);
        if (!id) {
            out.absent.push_back(q);
            continue;
        }
        auto &grades = out.table[q.qid];
        auto [it, inserted] = grades.emplace(*id, q.grade);
        if (!inserted) {
            it->second = std::max(it->second, q.grade);
        }
    }
    return out;
}

std::map<std::string, DocnoGrades> qrels_by_docno(std::vector<QrelEntry> const &qrels)
{
    std::map<std::string, DocnoGrades> out;
    for (auto const &q : qrels) {
        auto [it, inserted] = out[q.qid].emplace(q.docno, q.grade);
        if (!inserted) {
            it->second = std::max(it->second, q.grade);
        }
    }
    return out;
}

}  // namespace slidegar
