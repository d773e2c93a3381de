// slidegar command line: build artifacts, run experiments, evaluate, sweep graph depth.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "slidegar/corpus_graph.hpp"
#include "slidegar/corpus_store.hpp"
#include "slidegar/dense_index.hpp"
#include "slidegar/eval.hpp"
#include "slidegar/lexical_index.hpp"
#include "slidegar/log.hpp"
#include "slidegar/pipeline.hpp"
#include "slidegar/synth.hpp"

namespace fs = std::filesystem;
using namespace slidegar;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::vector<MetricSpec> parse_metrics(std::string const &list, std::size_t budget)
{
    std::vector<MetricSpec> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) {
            continue;
        }
        // recall@c is accepted as shorthand for the configured budget
        if (item == "recall@c") {
            item = "recall@" + std::to_string(budget);
        }
        out.push_back(MetricSpec::parse(item));
    }
    if (out.empty()) {
        throw ConfigError("--metrics is empty");
    }
    return out;
}

void cmd_build_index(fs::path const &corpus, fs::path const &out_dir, bool dedup)
{
    auto ingest = ingest_corpus_file(corpus, dedup);
    auto index = InvertedIndex::build(ingest.store);
    index.save(out_dir);
    {
        std::ofstream out(out_dir / "corpus.tsv", std::ios::binary | std::ios::trunc);
        write_corpus_tsv(out, ingest.store);
    }
    {
        std::ofstream out(out_dir / "dedup.jsonl", std::ios::binary | std::ios::trunc);
        write_dedup_report(out, ingest.report);
    }
    std::cout << "indexed " << ingest.store.size() << " docs, " << index.term_count() << " terms, "
              << ingest.report.size() << " duplicates dropped -> " << out_dir.string() << '\n';
}

void cmd_load_embeddings(fs::path const &file, fs::path const &index_dir, fs::path const &out, bool normalize)
{
    auto corpus = load_index_corpus(index_dir);
    auto table = load_embeddings(file, corpus.store, normalize);
    write_embedding_file(out, to_embedding_file(table, corpus.store));
    std::cout << "validated " << table.size() << " vectors of dim " << table.dim() << " -> " << out.string() << '\n';
}

void cmd_build_graph(fs::path const &index_dir, std::string const &source, std::size_t k, fs::path const &embeddings,
                     fs::path const &out_dir, unsigned threads)
{
    auto corpus = load_index_corpus(index_dir);
    auto const src = similarity_source_from_string(source);
    std::optional<CorpusGraph> graph;
    if (src == SimilaritySource::lexical) {
        graph = build_graph_lexical(InvertedIndex::load(index_dir), k, threads);
    } else {
        if (embeddings.empty()) {
            throw ConfigError("--source dense requires --embeddings");
        }
        graph = build_graph_dense(load_embeddings(embeddings, corpus.store), k, threads);
    }
    graph->save(out_dir, corpus.store);
    std::cout << "graph k=" << k << " source=" << source << " nodes=" << graph->size() << " -> " << out_dir.string()
              << '\n';
}

void cmd_run(fs::path const &config_path, std::optional<unsigned> jobs)
{
    auto config = PipelineConfig::load(config_path);
    if (jobs) {
        config.jobs = *jobs;
    }
    auto artifacts = Artifacts::load(config);
    auto output = run_pipeline(config, artifacts);
    write_outputs(config, output);
    std::uint64_t calls = 0;
    std::uint64_t degraded = 0;
    for (auto const &t : output.telemetry) {
        calls += t.llm_calls;
        degraded += t.degraded;
    }
    std::cout << "queries=" << output.telemetry.size() << " llm_calls=" << calls << " degraded=" << degraded
              << " run=" << config.run.string() << '\n';
}

void cmd_eval(fs::path const &run_path, fs::path const &qrels_path, std::string const &metrics, int rel_threshold,
              std::string const &gain, bool as_json)
{
    auto run = read_run_file(run_path);
    auto qrels = qrels_by_docno(read_qrels_file(qrels_path));
    EvalOptions options;
    options.rel_threshold = rel_threshold;
    options.gain = gain == "exponential" ? Gain::exponential : Gain::linear;
    std::size_t depth = 0;
    for (auto const &[q, entries] : run.queries) {
        depth = std::max(depth, entries.size());
    }
    auto report = evaluate(run, qrels, parse_metrics(metrics, depth), options);
    if (as_json) {
        std::cout << report.to_json().dump(2) << '\n';
    } else {
        std::cout << report.to_text();
    }
}

void cmd_compare(fs::path const &a, fs::path const &b, fs::path const &qrels_path, std::string const &metric,
                 int rel_threshold)
{
    EvalOptions options;
    options.rel_threshold = rel_threshold;
    auto cmp = compare_runs(read_run_file(a), read_run_file(b), qrels_by_docno(read_qrels_file(qrels_path)),
                            MetricSpec::parse(metric), options);
    std::cout << cmp.to_json().dump(2) << '\n';
}

std::vector<std::size_t> parse_k_list(std::string const &list)
{
    std::vector<std::size_t> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t pos = 0;
        auto const k = std::stoul(item, &pos);
        if (pos != item.size() || k == 0) {
            throw ConfigError("bad --k-list entry '" + item + "'");
        }
        out.push_back(k);
    }
    if (out.empty()) {
        throw ConfigError("--k-list is empty");
    }
    return out;
}

void cmd_sweep_k(fs::path const &config_path, std::string const &k_list, std::string const &metrics,
                 int rel_threshold, fs::path const &out_dir)
{
    auto config = PipelineConfig::load(config_path);
    if (config.strategy != Strategy::slidegar) {
        throw ConfigError("sweep-k needs strategy slidegar");
    }
    auto ks = parse_k_list(k_list);
    auto specs = parse_metrics(metrics, config.budget);
    auto base = config;
    base.truncate_k = *std::max_element(ks.begin(), ks.end());
    auto artifacts = Artifacts::load(base);
    auto qrels = qrels_by_docno(artifacts.qrels);
    EvalOptions options;
    options.rel_threshold = rel_threshold;

    std::vector<std::vector<double>> table;
    for (auto k : ks) {
        auto cfg = config;
        cfg.truncate_k = k;
        auto output = run_pipeline(cfg, artifacts);
        if (!out_dir.empty()) {
            cfg.run = out_dir / ("run.k" + std::to_string(k) + ".txt");
            cfg.telemetry = out_dir / ("telemetry.k" + std::to_string(k) + ".jsonl");
            write_outputs(cfg, output);
        }
        auto report = evaluate(output.run, qrels, specs, options);
        std::vector<double> row;
        for (auto const &c : report.columns) {
            row.push_back(c.mean);
        }
        table.push_back(std::move(row));
    }

    std::cout << std::setw(4) << "k";
    for (auto const &m : specs) {
        std::cout << "  " << std::setw(12) << m.name();
    }
    std::cout << '\n' << std::fixed << std::setprecision(4);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        std::cout << std::setw(4) << ks[i];
        for (double v : table[i]) {
            std::cout << "  " << std::setw(12) << v;
        }
        std::cout << '\n';
    }
    for (std::size_t m = 0; m < specs.size(); ++m) {
        if (specs[m].kind != MetricSpec::Kind::recall) {
            continue;
        }
        double worst = 0.0;
        for (std::size_t i = 1; i < ks.size(); ++i) {
            worst = std::max(worst, table[i - 1][m] - table[i][m]);
        }
        std::cout << "trend " << specs[m].name() << ": "
                  << (worst <= 0.0 ? "non-decreasing" : "largest dip " + format_score(worst)) << '\n';
    }
}

void cmd_synth(fs::path const &out_dir, fs::path const &spec_path, std::optional<std::uint64_t> seed,
               std::optional<double> gap, std::optional<std::size_t> n_queries)
{
    SynthSpec spec;
    if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) {
            throw Error("cannot open " + spec_path.string());
        }
        spec = SynthSpec::from_json(nlohmann::json::parse(in));
    }
    if (seed) {
        spec.seed = *seed;
    }
    if (gap) {
        spec.retrieval_gap = *gap;
    }
    if (n_queries) {
        spec.n_queries = *n_queries;
    }
    auto collection = generate(spec);
    write_collection(out_dir, collection);
    std::cout << "synth: " << collection.documents.size() << " docs, " << collection.queries.size() << " queries -> "
              << out_dir.string() << '\n';
}

}  // namespace

int main(int argc, char **argv)
{
    CLI::App app{"SlideGar: graph-based adaptive retrieval for listwise rerankers"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "debug|info|warn|error|off")
        ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

    fs::path corpus, out_dir, index_dir, file, out, embeddings, config_path, run_path, qrels_path, spec_path;
    bool dedup = false;
    bool normalize = false;
    bool as_json = false;
    std::string source = "lexical";
    std::size_t k = 16;
    unsigned threads = 1;
    std::optional<unsigned> jobs;
    std::string metrics = "ndcg@10,recall@c";
    std::string k_list = "2,4,6,8,10,12,14,16";
    std::string gain = "linear";
    std::string metric = "ndcg@10";
    int rel_threshold = 1;
    fs::path run_b;
    std::optional<std::uint64_t> seed;
    std::optional<double> gap;
    std::optional<std::size_t> n_queries;

    auto *build_index = app.add_subcommand("build-index", "Ingest a corpus and persist a BM25 index");
    build_index->add_option("corpus", corpus, "TSV (docno<TAB>text) or JSON-lines corpus")->required();
    build_index->add_option("out_dir", out_dir)->required();
    build_index->add_flag("--dedup", dedup, "drop exact duplicates after normalization");

    auto *load_emb = app.add_subcommand("load-embeddings", "Validate an embedding file against an index's corpus");
    load_emb->add_option("file", file)->required();
    load_emb->add_option("index_dir", index_dir)->required();
    load_emb->add_option("--out", out, "validated table, rows in corpus order")->required();
    load_emb->add_flag("--normalize", normalize, "L2-normalize rows");

    auto *build_graph = app.add_subcommand("build-graph", "Build a k-nearest-neighbour corpus graph");
    build_graph->add_option("--index", index_dir)->required();
    build_graph->add_option("--source", source)->check(CLI::IsMember({"lexical", "dense"}));
    build_graph->add_option("--k", k)->check(CLI::PositiveNumber);
    build_graph->add_option("--embeddings", embeddings);
    build_graph->add_option("--out", out_dir)->required();
    build_graph->add_option("--threads", threads)->check(CLI::PositiveNumber);

    auto *run = app.add_subcommand("run", "Retrieve and rerank every query of a config");
    run->add_option("config", config_path)->required();
    run->add_option("--jobs", jobs, "queries processed in parallel")->check(CLI::PositiveNumber);

    auto *eval = app.add_subcommand("eval", "Score a TREC run against qrels");
    eval->add_option("run", run_path)->required();
    eval->add_option("qrels", qrels_path)->required();
    eval->add_option("--metrics", metrics, "comma list, e.g. ndcg@10,recall@50");
    eval->add_option("--rel-threshold", rel_threshold, "minimum grade counted by recall");
    eval->add_option("--gain", gain)->check(CLI::IsMember({"linear", "exponential"}));
    eval->add_flag("--json", as_json);

    auto *compare = app.add_subcommand("compare", "Per-query metric deltas between two runs (b - a)");
    compare->add_option("run_a", run_path)->required();
    compare->add_option("run_b", run_b)->required();
    compare->add_option("qrels", qrels_path)->required();
    compare->add_option("--metric", metric);
    compare->add_option("--rel-threshold", rel_threshold);

    auto *sweep = app.add_subcommand("sweep-k", "Rerun a slidegar config for several graph depths");
    sweep->add_option("config", config_path)->required();
    sweep->add_option("--k-list", k_list);
    sweep->add_option("--metrics", metrics);
    sweep->add_option("--rel-threshold", rel_threshold);
    sweep->add_option("--out-dir", out_dir, "also write one run and telemetry file per k");

    auto *synth = app.add_subcommand("synth", "Generate a clustered synthetic test collection");
    synth->add_option("out_dir", out_dir)->required();
    synth->add_option("--spec", spec_path, "JSON spec; missing fields take defaults");
    synth->add_option("--seed", seed);
    synth->add_option("--gap", gap, "fraction of relevant docs sharing no query term");
    synth->add_option("--n-queries", n_queries);

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const &e) {
        return app.exit(e);
    } catch (CLI::ParseError const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    log::set_level(log_level == "debug"  ? log::Level::debug
                   : log_level == "info" ? log::Level::info
                   : log_level == "warn" ? log::Level::warn
                   : log_level == "error" ? log::Level::error
                                          : log::Level::off);

    try {
        if (*build_index) {
            cmd_build_index(corpus, out_dir, dedup);
        } else if (*load_emb) {
            cmd_load_embeddings(file, index_dir, out, normalize);
        } else if (*build_graph) {
            cmd_build_graph(index_dir, source, k, embeddings, out_dir, threads);
        } else if (*run) {
            cmd_run(config_path, jobs);
        } else if (*eval) {
            cmd_eval(run_path, qrels_path, metrics, rel_threshold, gain, as_json);
        } else if (*compare) {
            cmd_compare(run_path, run_b, qrels_path, metric, rel_threshold);
        } else if (*sweep) {
            cmd_sweep_k(config_path, k_list, metrics, rel_threshold, out_dir);
        } else if (*synth) {
            cmd_synth(out_dir, spec_path, seed, gap, n_queries);
        }
    } catch (ConfigError const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (std::exception const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
