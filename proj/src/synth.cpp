#include "slidegar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

namespace slidegar {

namespace {

using json = nlohmann::json;

constexpr double kRelevantOffset = 0.6;

// Everything derives from mt19937_64 raw output so fixtures are reproducible across
// standard libraries (std distributions are implementation-defined).
class SynthRng {
   public:
    explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n)
    {
        auto const limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = 0;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Box-Muller, one value per call.
    double gaussian()
    {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double const u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <typename T>
    void shuffle(std::vector<T> &v)
    {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    /// `k` distinct values from `pool`, in draw order.
    template <typename T>
    std::vector<T> sample(std::vector<T> pool, std::size_t k)
    {
        for (std::size_t i = 0; i < k; ++i) {
            std::swap(pool[i], pool[i + below(pool.size() - i)]);
        }
        pool.resize(k);
        return pool;
    }

   private:
    std::mt19937_64 engine_;
};

std::string cluster_term(std::size_t c, std::size_t i) { return "k" + std::to_string(c) + "v" + std::to_string(i); }
std::string shared_term(std::size_t i) { return "s" + std::to_string(i); }
std::string query_term(std::size_t q, std::size_t i) { return "q" + std::to_string(q) + "u" + std::to_string(i); }
std::string topic_term(std::size_t q, std::size_t i) { return "q" + std::to_string(q) + "t" + std::to_string(i); }

std::string docno_of(std::size_t c, std::size_t i)
{
    std::string cs = std::to_string(c);
    std::string is = std::to_string(i);
    return "c" + std::string(cs.size() < 3 ? 3 - cs.size() : 0, '0') + cs + "d" + std::string(is.size() < 3 ? 3 - is.size() : 0, '0')
           + is;
}

std::vector<double> unit_gaussian(SynthRng &rng, std::size_t dim)
{
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto &x : v) {
        x = rng.gaussian();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto &x : v) {
        x /= norm;
    }
    return v;
}

std::vector<float> embed(SynthRng &rng, std::vector<double> const &centroid, std::vector<double> const *offset,
                         double noise)
{
    std::vector<double> v = centroid;
    double norm = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (offset != nullptr) {
            v[i] += kRelevantOffset * (*offset)[i];
        }
        v[i] += noise * rng.gaussian();
        norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(v[i] / norm);
    }
    return out;
}

std::string join(std::vector<std::string> const &tokens)
{
    std::string out;
    for (auto const &t : tokens) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += t;
    }
    return out;
}

}  // namespace

std::size_t SynthSpec::hidden_per_query() const
{
    return static_cast<std::size_t>(std::floor(retrieval_gap * static_cast<double>(relevant_per_query) + 1e-9));
}

void SynthSpec::validate() const
{
    if (n_clusters < 1 || docs_per_cluster < 1 || vocab_per_cluster < 1 || shared_vocab < 1 || dim < 1
        || n_queries < 1 || relevant_per_query < 1 || topic_terms < 1) {
        throw ConfigError("synth spec: all counts must be >= 1");
    }
    if (!(retrieval_gap >= 0.0 && retrieval_gap < 1.0)) {
        throw ConfigError("synth spec: retrieval_gap must lie in [0, 1)");
    }
    if (!(noise >= 0.0) || !std::isfinite(noise)) {
        throw ConfigError("synth spec: noise must be finite and >= 0");
    }
    if (cluster_terms_per_doc > vocab_per_cluster) {
        throw ConfigError("synth spec: vocabulary exhausted, cluster_terms_per_doc=" + std::to_string(cluster_terms_per_doc)
                          + " > vocab_per_cluster=" + std::to_string(vocab_per_cluster));
    }
    // hidden docs must avoid the query's shared term
    if (shared_terms_per_doc + 1 > shared_vocab) {
        throw ConfigError("synth spec: vocabulary exhausted, shared_terms_per_doc=" + std::to_string(shared_terms_per_doc)
                          + " needs shared_vocab > " + std::to_string(shared_terms_per_doc));
    }
    auto const queries_per_cluster = (n_queries + n_clusters - 1) / n_clusters;
    if (queries_per_cluster * relevant_per_query > docs_per_cluster) {
        throw ConfigError("synth spec: " + std::to_string(queries_per_cluster) + " queries per cluster x "
                          + std::to_string(relevant_per_query) + " relevant docs exceed docs_per_cluster="
                          + std::to_string(docs_per_cluster));
    }
}

json SynthSpec::to_json() const
{
    return {{"n_clusters", n_clusters},
            {"docs_per_cluster", docs_per_cluster},
            {"vocab_per_cluster", vocab_per_cluster},
            {"shared_vocab", shared_vocab},
            {"dim", dim},
            {"n_queries", n_queries},
            {"relevant_per_query", relevant_per_query},
            {"retrieval_gap", retrieval_gap},
            {"seed", seed},
            {"cluster_terms_per_doc", cluster_terms_per_doc},
            {"shared_terms_per_doc", shared_terms_per_doc},
            {"topic_terms", topic_terms},
            {"noise", noise}};
}

SynthSpec SynthSpec::from_json(json const &j)
{
    SynthSpec s;
    s.n_clusters = j.value("n_clusters", s.n_clusters);
    s.docs_per_cluster = j.value("docs_per_cluster", s.docs_per_cluster);
    s.vocab_per_cluster = j.value("vocab_per_cluster", s.vocab_per_cluster);
    s.shared_vocab = j.value("shared_vocab", s.shared_vocab);
    s.dim = j.value("dim", s.dim);
    s.n_queries = j.value("n_queries", s.n_queries);
    s.relevant_per_query = j.value("relevant_per_query", s.relevant_per_query);
    s.retrieval_gap = j.value("retrieval_gap", s.retrieval_gap);
    s.seed = j.value("seed", s.seed);
    s.cluster_terms_per_doc = j.value("cluster_terms_per_doc", s.cluster_terms_per_doc);
    s.shared_terms_per_doc = j.value("shared_terms_per_doc", s.shared_terms_per_doc);
    s.topic_terms = j.value("topic_terms", s.topic_terms);
    s.noise = j.value("noise", s.noise);
    return s;
}

SynthCollection generate(SynthSpec const &spec)
{
    spec.validate();
    SynthRng rng(spec.seed);
    SynthCollection out;
    out.spec = spec;

    std::vector<std::vector<double>> centroids;
    for (std::size_t c = 0; c < spec.n_clusters; ++c) {
        centroids.push_back(unit_gaussian(rng, spec.dim));
    }

    // Per query: target cluster, relevant docs (first `hidden` of them hidden), shared term.
    struct Plan {
        std::size_t cluster = 0;
        std::vector<std::size_t> relevant;
        std::size_t n_hidden = 0;
        std::size_t shared = 0;
        std::vector<double> offset;
    };
    std::vector<Plan> plans(spec.n_queries);
    std::vector<std::vector<std::size_t>> unassigned(spec.n_clusters);
    for (auto &pool : unassigned) {
        pool.resize(spec.docs_per_cluster);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
    }
    for (std::size_t q = 0; q < spec.n_queries; ++q) {
        auto &p = plans[q];
        p.cluster = q % spec.n_clusters;
        auto &pool = unassigned[p.cluster];
        rng.shuffle(pool);
        p.relevant.assign(pool.end() - static_cast<std::ptrdiff_t>(spec.relevant_per_query), pool.end());
        pool.resize(pool.size() - spec.relevant_per_query);
        p.n_hidden = spec.hidden_per_query();
        p.shared = rng.below(spec.shared_vocab);
        p.offset = unit_gaussian(rng, spec.dim);
    }

    // role of each doc: owning query (if relevant) and whether it is hidden
    struct Role {
        std::ptrdiff_t query = -1;
        bool hidden = false;
    };
    std::vector<std::vector<Role>> roles(spec.n_clusters, std::vector<Role>(spec.docs_per_cluster));
    for (std::size_t q = 0; q < spec.n_queries; ++q) {
        auto const &p = plans[q];
        for (std::size_t r = 0; r < p.relevant.size(); ++r) {
            roles[p.cluster][p.relevant[r]] = {static_cast<std::ptrdiff_t>(q), r < p.n_hidden};
        }
    }

    std::vector<std::size_t> cluster_pool(spec.vocab_per_cluster);
    std::iota(cluster_pool.begin(), cluster_pool.end(), std::size_t{0});
    std::vector<std::size_t> shared_pool(spec.shared_vocab);
    std::iota(shared_pool.begin(), shared_pool.end(), std::size_t{0});

    out.doc_embeddings.dim = spec.dim;
    out.doc_embeddings.normalized = true;
    for (std::size_t c = 0; c < spec.n_clusters; ++c) {
        for (std::size_t i = 0; i < spec.docs_per_cluster; ++i) {
            auto const role = roles[c][i];
            Plan const *plan = role.query >= 0 ? &plans[static_cast<std::size_t>(role.query)] : nullptr;
            std::vector<std::string> tokens;
            for (auto t : rng.sample(cluster_pool, spec.cluster_terms_per_doc)) {
                tokens.push_back(cluster_term(c, t));
            }
            auto shared_candidates = shared_pool;
            if (plan != nullptr) {
                shared_candidates.erase(std::find(shared_candidates.begin(), shared_candidates.end(), plan->shared));
            }
            for (auto t : rng.sample(shared_candidates, spec.shared_terms_per_doc)) {
                tokens.push_back(shared_term(t));
            }
            if (plan != nullptr) {
                auto const q = static_cast<std::size_t>(role.query);
                for (std::size_t t = 0; t < spec.topic_terms; ++t) {
                    tokens.push_back(topic_term(q, t));
                }
                if (!role.hidden) {
                    tokens.push_back(query_term(q, 0));
                    tokens.push_back(query_term(q, 1));
                    tokens.push_back(shared_term(plan->shared));
                }
            }
            rng.shuffle(tokens);
            auto const docno = docno_of(c, i);
            out.documents.push_back({docno, join(tokens)});
            out.doc_embeddings.records.push_back(
                {docno, embed(rng, centroids[c], plan != nullptr ? &plan->offset : nullptr, spec.noise)});
        }
    }

    out.query_embeddings.dim = spec.dim;
    out.query_embeddings.normalized = true;
    for (std::size_t q = 0; q < spec.n_queries; ++q) {
        auto const &p = plans[q];
        auto const qid = "q" + std::to_string(q + 1);
        out.queries.push_back({qid, query_term(q, 0) + " " + query_term(q, 1) + " " + shared_term(p.shared)});
        out.query_embeddings.records.push_back({qid, embed(rng, centroids[p.cluster], &p.offset, spec.noise)});

        std::set<std::size_t> relevant(p.relevant.begin(), p.relevant.end());
        for (std::size_t i = 0; i < spec.docs_per_cluster; ++i) {
            int const grade = relevant.contains(i) ? 2 : 1;
            out.qrels.push_back({qid, docno_of(p.cluster, i), grade});
        }
        out.hidden[qid];
        out.visible[qid];
        for (std::size_t r = 0; r < p.relevant.size(); ++r) {
            auto &bucket = r < p.n_hidden ? out.hidden[qid] : out.visible[qid];
            bucket.push_back(docno_of(p.cluster, p.relevant[r]));
        }
    }
    return out;
}

void write_collection(std::filesystem::path const &dir, SynthCollection const &collection)
{
    std::filesystem::create_directories(dir);
    auto open = [&](char const *name) {
        std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw Error("cannot write " + (dir / name).string());
        }
        return f;
    };
    {
        auto f = open("corpus.tsv");
        for (auto const &d : collection.documents) {
            f << d.docno << '\t' << d.text << '\n';
        }
    }
    {
        auto f = open("queries.tsv");
        for (auto const &q : collection.queries) {
            f << q.qid << '\t' << q.text << '\n';
        }
    }
    {
        auto f = open("qrels.txt");
        write_qrels(f, collection.qrels);
    }
    {
        auto f = open("hidden.tsv");
        for (auto const &[qid, docnos] : collection.hidden) {
            for (auto const &d : docnos) {
                f << qid << '\t' << d << '\n';
            }
        }
    }
    write_embedding_file(dir / "embeddings.bin", collection.doc_embeddings);
    write_embedding_file(dir / "query_embeddings.bin", collection.query_embeddings);
    json provenance = {{"generator_version", kSynthGeneratorVersion}, {"rng", kSynthRng},
                       {"spec", collection.spec.to_json()}};
    open("spec.json") << provenance.dump(2) << '\n';
}

}  // namespace slidegar
