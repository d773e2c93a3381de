#include <doctest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "slidegar/remote_ranker.hpp"
#include "support.hpp"

using namespace slidegar;
using json = nlohmann::json;

namespace {

Query const kQuery{"q7", "graph reranking"};

// Local mock of the rerank endpoint, driven by a per-request handler.
class MockServer {
   public:
    using Handler = std::function<void(json const &request, httplib::Response &res, int call)>;

    explicit MockServer(Handler handler, std::string path = "/rerank") : handler_(std::move(handler))
    {
        server_.Post(path, [this](httplib::Request const &req, httplib::Response &res) {
            int const call = calls_++;
            {
                std::lock_guard lock(mutex_);
                last_auth_ = req.get_header_value("Authorization");
                last_body_ = req.body;
            }
            handler_(json::parse(req.body), res, call);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockServer()
    {
        server_.stop();
        thread_.join();
    }

    [[nodiscard]] std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
    [[nodiscard]] int calls() const { return calls_.load(); }
    std::string last_auth()
    {
        std::lock_guard lock(mutex_);
        return last_auth_;
    }
    std::string last_body()
    {
        std::lock_guard lock(mutex_);
        return last_body_;
    }

   private:
    Handler handler_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> calls_{0};
    std::mutex mutex_;
    std::string last_auth_;
    std::string last_body_;
};

std::vector<std::string> candidate_docnos(json const &request)
{
    std::vector<std::string> out;
    for (auto const &c : request.at("candidates")) {
        out.push_back(c.at("docno").get<std::string>());
    }
    return out;
}

void reply(httplib::Response &res, std::vector<std::string> const &ordering)
{
    res.set_content(json{{"ordering", ordering}}.dump(), "application/json");
}

RemoteRankerOptions fast_options(std::string endpoint, unsigned retries)
{
    RemoteRankerOptions o;
    o.endpoint = std::move(endpoint);
    o.retries = retries;
    o.initial_backoff = std::chrono::milliseconds(1);
    o.timeout = std::chrono::milliseconds(2000);
    o.bearer_token = "";
    return o;
}

Window sample_window(CorpusStore const &store)
{
    std::vector<DocId> ids{DocId{0}, DocId{1}, DocId{2}};
    return make_window(kQuery, store, ids);
}

}  // namespace

TEST_CASE("reversing endpoint gives the reversed batch")
{
    MockServer server([](json const &req, httplib::Response &res, int) {
        auto d = candidate_docnos(req);
        std::reverse(d.begin(), d.end());
        reply(res, d);
    });
    auto store = testing::numbered_store(3);
    RemoteRanker ranker(fast_options(server.endpoint(), 0));
    CallCounter counter;
    auto b = rank(ranker, sample_window(store), counter);
    CHECK(b == Batch{DocId{2}, DocId{1}, DocId{0}});
    CHECK(counter.calls == 1);
    CHECK(counter.degraded == 0);
    auto body = json::parse(server.last_body());
    CHECK(body.at("qid") == "q7");
    CHECK(body.at("query") == "graph reranking");
}

TEST_CASE("duplicate docno response degrades to input order")
{
    MockServer server([](json const &, httplib::Response &res, int) { reply(res, {"d0", "d0", "d1"}); });
    auto store = testing::numbered_store(3);
    RemoteRanker ranker(fast_options(server.endpoint(), 2));
    CallCounter counter;
    auto b = rank(ranker, sample_window(store), counter);
    CHECK(b == Batch{DocId{0}, DocId{1}, DocId{2}});
    CHECK(counter.calls == 1);
    CHECK(counter.degraded == 1);
    CHECK(server.calls() == 3);
    CHECK(ranker.degradations() == 1);
}

TEST_CASE("two timeouts then success with retries=3")
{
    MockServer server([](json const &req, httplib::Response &res, int call) {
        if (call < 2) {
            std::this_thread::sleep_for(std::chrono::milliseconds(600));
        }
        auto d = candidate_docnos(req);
        std::rotate(d.begin(), d.begin() + 1, d.end());
        reply(res, d);
    });
    auto store = testing::numbered_store(3);
    auto options = fast_options(server.endpoint(), 3);
    options.timeout = std::chrono::milliseconds(200);
    RemoteRanker ranker(options);
    CallCounter counter;
    auto b = rank(ranker, sample_window(store), counter);
    CHECK(b == Batch{DocId{1}, DocId{2}, DocId{0}});
    CHECK(counter.calls == 1);
    CHECK(counter.degraded == 0);
    CHECK(ranker.http_attempts() == 3);
}

TEST_CASE("server errors are retried")
{
    MockServer server([](json const &req, httplib::Response &res, int call) {
        if (call == 0) {
            res.status = 503;
            return;
        }
        if (call == 1) {
            res.set_content("not json", "text/plain");
            return;
        }
        reply(res, candidate_docnos(req));
    });
    auto store = testing::numbered_store(3);
    RemoteRanker ranker(fast_options(server.endpoint(), 3));
    CallCounter counter;
    CHECK(rank(ranker, sample_window(store), counter) == Batch{DocId{0}, DocId{1}, DocId{2}});
    CHECK(counter.degraded == 0);
    CHECK(server.calls() == 3);
}

TEST_CASE("unreachable endpoint degrades after retries")
{
    std::string endpoint;
    {
        MockServer gone([](json const &, httplib::Response &, int) {});
        endpoint = gone.endpoint();
    }
    auto store = testing::numbered_store(3);
    RemoteRanker ranker(fast_options(endpoint, 1));
    CallCounter counter;
    CHECK(rank(ranker, sample_window(store), counter) == Batch{DocId{0}, DocId{1}, DocId{2}});
    CHECK(counter.degraded == 1);
    CHECK(ranker.http_attempts() == 2);
}

TEST_CASE("bearer token and path prefix")
{
    MockServer server([](json const &req, httplib::Response &res, int) { reply(res, candidate_docnos(req)); },
                      "/v1/rerank");
    auto store = testing::numbered_store(3);
    auto options = fast_options(server.endpoint() + "/v1/", 0);
    options.bearer_token = "sekret";
    RemoteRanker ranker(options);
    CallCounter counter;
    rank(ranker, sample_window(store), counter);
    CHECK(counter.degraded == 0);
    CHECK(server.last_auth() == "Bearer sekret");
}

TEST_CASE("concurrent queries share one client")
{
    MockServer server([](json const &req, httplib::Response &res, int) {
        auto d = candidate_docnos(req);
        std::reverse(d.begin(), d.end());
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        reply(res, d);
    });
    auto store = testing::numbered_store(3);
    RemoteRanker ranker(fast_options(server.endpoint(), 0));
    std::atomic<int> ok{0};
    {
        std::vector<std::jthread> threads;
        for (int t = 0; t < 4; ++t) {
            threads.emplace_back([&] {
                CallCounter counter;
                if (rank(ranker, sample_window(store), counter) == Batch{DocId{2}, DocId{1}, DocId{0}}) {
                    ++ok;
                }
            });
        }
    }
    CHECK(ok == 4);
}

TEST_CASE("backoff schedule")
{
    RemoteRankerOptions o;
    o.endpoint = "http://127.0.0.1:1";
    RemoteRanker ranker(o);
    CHECK(ranker.backoff(0).count() == 200);
    CHECK(ranker.backoff(1).count() == 400);
    CHECK(ranker.backoff(2).count() == 800);
    CHECK(ranker.backoff(10).count() == 10000);
    CHECK_THROWS_AS(RemoteRanker(RemoteRankerOptions{}), ConfigError);
}

TEST_CASE("documents are truncated to 512 whitespace tokens")
{
    std::string text;
    for (int i = 0; i < 600; ++i) {
        text += "w" + std::to_string(i) + (i % 7 == 0 ? "\t\n " : " ");
    }
    auto t = truncate_tokens(text);
    CHECK(std::count(t.begin(), t.end(), ' ') == 511);
    CHECK(t.rfind("w511") == t.size() - 4);
    CHECK(truncate_tokens("  a  b ", 5) == "a b");

    auto store = testing::make_store({{"long", text}});
    std::vector<DocId> ids{DocId{0}};
    auto body = rerank_request_body(make_window(kQuery, store, ids));
    CHECK(body.at("candidates").at(0).at("text") == t);
}
