#include "slidegar/eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace slidegar {

namespace {

using json = nlohmann::json;

double mean_of(std::map<std::string, double> const &values)
{
    if (values.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (auto const &[q, v] : values) {
        s += v;
    }
    return s / static_cast<double>(values.size());
}

}  // namespace

std::string format_score(double score)
{
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), score);
    if (ec != std::errc{}) {
        throw Error("cannot format score");
    }
    return std::string(buf.data(), end);
}

void write_run(std::ostream &out, RunFile const &run)
{
    for (auto const &[qid, entries] : run.queries) {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out << qid << " Q0 " << entries[i].docno << ' ' << (i + 1) << ' ' << format_score(entries[i].score) << ' '
                << run.tag << '\n';
        }
    }
}

void write_run_file(std::filesystem::path const &path, RunFile const &run)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    write_run(out, run);
}

RunFile read_run(std::istream &in)
{
    RunFile run;
    run.tag.clear();
    std::map<std::string, std::vector<std::pair<long, RunEntry>>> raw;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream fields(line);
        std::string qid, q0, docno, tag;
        long rank = 0;
        double score = 0.0;
        if (!(fields >> qid >> q0 >> docno >> rank >> score >> tag)) {
            throw ParseError("run line " + std::to_string(lineno) + ": expected 'qid Q0 docno rank score tag'");
        }
        if (run.tag.empty()) {
            run.tag = tag;
        }
        raw[qid].push_back({rank, {docno, score}});
    }
    for (auto &[qid, entries] : raw) {
        std::sort(entries.begin(), entries.end(), [](auto const &a, auto const &b) { return a.first < b.first; });
        std::unordered_set<std::string> docnos;
        auto &out = run.queries[qid];
        for (std::size_t i = 0; i < entries.size(); ++i) {
            auto const &[rank, entry] = entries[i];
            if (rank != static_cast<long>(i + 1)) {
                throw ParseError("run qid " + qid + ": ranks are not 1..n");
            }
            if (i > 0 && entry.score > entries[i - 1].second.score) {
                throw ParseError("run qid " + qid + ": score increases at rank " + std::to_string(rank));
            }
            if (!docnos.insert(entry.docno).second) {
                throw ParseError("run qid " + qid + ": duplicate docno " + entry.docno);
            }
            out.push_back(entry);
        }
    }
    return run;
}

RunFile read_run_file(std::filesystem::path const &path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    try {
        return read_run(in);
    } catch (ParseError const &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string MetricSpec::name() const
{
    return (kind == Kind::ndcg ? "ndcg@" : "recall@") + std::to_string(cutoff);
}

MetricSpec MetricSpec::parse(std::string const &name)
{
    auto const at = name.find('@');
    if (at == std::string::npos) {
        throw ConfigError("metric '" + name + "' needs a cutoff, e.g. ndcg@10");
    }
    MetricSpec spec;
    auto const kind = name.substr(0, at);
    if (kind == "ndcg") {
        spec.kind = Kind::ndcg;
    } else if (kind == "recall") {
        spec.kind = Kind::recall;
    } else {
        throw ConfigError("unknown metric '" + kind + "'");
    }
    auto const digits = name.substr(at + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), spec.cutoff);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || spec.cutoff < 1) {
        throw ConfigError("bad cutoff in metric '" + name + "'");
    }
    return spec;
}

MetricReport::Column const &MetricReport::column(std::string const &metric) const
{
    for (auto const &c : columns) {
        if (c.metric == metric) {
            return c;
        }
    }
    throw Error("no metric column " + metric);
}

json MetricReport::to_json() const
{
    json j;
    for (auto const &c : columns) {
        j["metrics"][c.metric] = {{"mean", c.mean}, {"per_query", c.per_query}, {"undefined", c.undefined}};
    }
    j["missing_in_run"] = missing_in_run;
    j["unjudged"] = unjudged;
    return j;
}

std::string MetricReport::to_text() const
{
    std::set<std::string> qids;
    for (auto const &c : columns) {
        for (auto const &[q, v] : c.per_query) {
            qids.insert(q);
        }
    }
    std::size_t qwidth = 4;
    for (auto const &q : qids) {
        qwidth = std::max(qwidth, q.size());
    }
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(qwidth)) << "qid";
    for (auto const &c : columns) {
        out << "  " << std::right << std::setw(12) << c.metric;
    }
    out << '\n';
    auto row = [&](std::string const &label, auto const &value_of) {
        out << std::left << std::setw(static_cast<int>(qwidth)) << label;
        for (auto const &c : columns) {
            out << "  " << std::right << std::setw(12) << value_of(c);
        }
        out << '\n';
    };
    for (auto const &q : qids) {
        row(q, [&](Column const &c) -> std::string {
            auto it = c.per_query.find(q);
            if (it == c.per_query.end()) {
                return "-";
            }
            std::ostringstream v;
            v << std::fixed << std::setprecision(4) << it->second;
            return v.str();
        });
    }
    row("mean", [](Column const &c) {
        std::ostringstream v;
        v << std::fixed << std::setprecision(4) << c.mean;
        return v.str();
    });
    return out.str();
}

MetricReport evaluate(RunFile const &run, std::map<std::string, DocnoGrades> const &qrels,
                      std::vector<MetricSpec> const &metrics, EvalOptions const &options)
{
    MetricReport report;
    for (auto const &[qid, grades] : qrels) {
        if (!run.queries.contains(qid)) {
            report.missing_in_run.push_back(qid);
        }
    }
    for (auto const &[qid, entries] : run.queries) {
        if (!qrels.contains(qid)) {
            report.unjudged.push_back(qid);
        }
    }
    for (auto const &m : metrics) {
        MetricReport::Column col;
        col.metric = m.name();
        for (auto const &[qid, entries] : run.queries) {
            auto judged = qrels.find(qid);
            if (judged == qrels.end()) {
                continue;
            }
            std::vector<std::string> docnos;
            docnos.reserve(entries.size());
            for (auto const &e : entries) {
                docnos.push_back(e.docno);
            }
            std::span<std::string const> ranked(docnos);
            if (m.kind == MetricSpec::Kind::ndcg) {
                col.per_query[qid] = ndcg_at(ranked, judged->second, m.cutoff, options.gain);
            } else if (auto r = recall_at(ranked, judged->second, m.cutoff, options.rel_threshold)) {
                col.per_query[qid] = *r;
            } else {
                col.undefined.push_back(qid);
            }
        }
        col.mean = mean_of(col.per_query);
        report.columns.push_back(std::move(col));
    }
    return report;
}

json RunComparison::to_json() const
{
    return {{"metric", metric},   {"mean_a", mean_a},       {"mean_b", mean_b},        {"mean_delta", mean_delta},
            {"delta", delta},     {"only_in_a", only_in_a}, {"only_in_b", only_in_b}};
}

RunComparison compare_runs(MetricReport::Column const &a, MetricReport::Column const &b)
{
    RunComparison cmp;
    cmp.metric = a.metric;
    std::map<std::string, double> shared_a;
    std::map<std::string, double> shared_b;
    for (auto const &[q, v] : a.per_query) {
        if (auto it = b.per_query.find(q); it != b.per_query.end()) {
            cmp.delta[q] = it->second - v;
            shared_a[q] = v;
            shared_b[q] = it->second;
        } else {
            cmp.only_in_a.push_back(q);
        }
    }
    for (auto const &[q, v] : b.per_query) {
        if (!a.per_query.contains(q)) {
            cmp.only_in_b.push_back(q);
        }
    }
    cmp.mean_a = mean_of(shared_a);
    cmp.mean_b = mean_of(shared_b);
    cmp.mean_delta = mean_of(cmp.delta);
    return cmp;
}

RunComparison compare_runs(RunFile const &a, RunFile const &b, std::map<std::string, DocnoGrades> const &qrels,
                           MetricSpec const &metric, EvalOptions const &options)
{
    auto ra = evaluate(a, qrels, {metric}, options);
    auto rb = evaluate(b, qrels, {metric}, options);
    return compare_runs(ra.columns.front(), rb.columns.front());
}

}  // namespace slidegar
