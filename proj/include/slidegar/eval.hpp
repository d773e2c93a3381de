#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "slidegar/corpus_store.hpp"
#include "slidegar/types.hpp"

namespace slidegar {

enum class Gain { linear, exponential };

/// DCG with gain = grade (or 2^grade - 1) and discount log2(rank + 1), normalized by the
/// DCG of the grades sorted descending. Zero when no judged document has a positive grade.
template <typename Key>
double ndcg_at(std::span<Key const> ranking, std::unordered_map<Key, int> const &grades, std::size_t cutoff = 10,
               Gain gain = Gain::linear)
{
    auto gain_of = [gain](int g) { return gain == Gain::linear ? static_cast<double>(g) : std::exp2(g) - 1.0; };
    double dcg = 0.0;
    for (std::size_t i = 0; i < ranking.size() && i < cutoff; ++i) {
        auto it = grades.find(ranking[i]);
        if (it != grades.end() && it->second > 0) {
            dcg += gain_of(it->second) / std::log2(static_cast<double>(i) + 2.0);
        }
    }
    std::vector<int> ideal;
    for (auto const &[key, g] : grades) {
        if (g > 0) {
            ideal.push_back(g);
        }
    }
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < ideal.size() && i < cutoff; ++i) {
        idcg += gain_of(ideal[i]) / std::log2(static_cast<double>(i) + 2.0);
    }
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

/// Fraction of relevant (grade >= threshold) documents found in the top `cutoff`;
/// nullopt when the query has no relevant documents.
template <typename Key>
std::optional<double> recall_at(std::span<Key const> ranking, std::unordered_map<Key, int> const &grades,
                                std::size_t cutoff, int rel_threshold = 1)
{
    std::size_t relevant = 0;
    for (auto const &[key, g] : grades) {
        relevant += g >= rel_threshold ? 1 : 0;
    }
    if (relevant == 0) {
        return std::nullopt;
    }
    std::size_t found = 0;
    for (std::size_t i = 0; i < ranking.size() && i < cutoff; ++i) {
        auto it = grades.find(ranking[i]);
        found += it != grades.end() && it->second >= rel_threshold ? 1 : 0;
    }
    return static_cast<double>(found) / static_cast<double>(relevant);
}

struct RunEntry {
    std::string docno;
    double score = 0.0;
};

/// TREC run: per-qid ranked lists plus a tag. Within a qid, ranks are 1..n, scores
/// non-increasing and docnos unique.
struct RunFile {
    std::string tag = "slidegar";
    std::map<std::string, std::vector<RunEntry>> queries;
};

/// Lines `qid Q0 docno rank score tag`, sorted by (qid, rank). Scores use the shortest
/// round-trip decimal form.
void write_run(std::ostream &out, RunFile const &run);
void write_run_file(std::filesystem::path const &path, RunFile const &run);
RunFile read_run(std::istream &in);
RunFile read_run_file(std::filesystem::path const &path);

std::string format_score(double score);

/// Metric names: `ndcg@N`, `recall@N`.
struct MetricSpec {
    enum class Kind { ndcg, recall } kind = Kind::ndcg;
    std::size_t cutoff = 10;

    [[nodiscard]] std::string name() const;
    static MetricSpec parse(std::string const &name);
};

struct EvalOptions {
    int rel_threshold = 1;
    Gain gain = Gain::linear;
};

struct MetricReport {
    struct Column {
        std::string metric;
        std::map<std::string, double> per_query;
        double mean = 0.0;
        std::vector<std::string> undefined;  ///< qids without relevant docs (recall only)
    };
    std::vector<Column> columns;
    std::vector<std::string> missing_in_run;  ///< judged qids the run does not cover
    std::vector<std::string> unjudged;        ///< run qids without any qrels

    [[nodiscard]] Column const &column(std::string const &metric) const;
    [[nodiscard]] nlohmann::json to_json() const;
    /// Aligned-column text table, one row per qid plus a `mean` row.
    [[nodiscard]] std::string to_text() const;
};

/// Evaluates the qids present in both the run and the qrels; the rest are listed, not averaged.
MetricReport evaluate(RunFile const &run, std::map<std::string, DocnoGrades> const &qrels,
                      std::vector<MetricSpec> const &metrics, EvalOptions const &options = {});

struct RunComparison {
    std::string metric;
    std::map<std::string, double> delta;  ///< b − a per qid present in both
    double mean_a = 0.0;
    double mean_b = 0.0;
    double mean_delta = 0.0;
    std::vector<std::string> only_in_a;
    std::vector<std::string> only_in_b;

    [[nodiscard]] nlohmann::json to_json() const;
};

RunComparison compare_runs(MetricReport::Column const &a, MetricReport::Column const &b);
RunComparison compare_runs(RunFile const &a, RunFile const &b, std::map<std::string, DocnoGrades> const &qrels,
                           MetricSpec const &metric, EvalOptions const &options = {});

}  // namespace slidegar
