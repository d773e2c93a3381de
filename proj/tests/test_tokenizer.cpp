#include <doctest.h>

#include "slidegar/tokenizer.hpp"

using namespace slidegar;
using V = std::vector<std::string>;

TEST_CASE("tokenize lowercases and splits on punctuation")
{
    CHECK(tokenize("Hello, World! foo-bar_baz 42x") == V{"hello", "world", "foo", "bar", "baz", "42x"});
}

TEST_CASE("stopwords are dropped")
{
    CHECK(tokenize("The cat and THE dog") == V{"cat", "dog"});
    CHECK(tokenize("a an the of").empty());
}

TEST_CASE("stopword list is sorted, unique and has 33 entries")
{
    auto sw = stopwords();
    CHECK(sw.size() == 33);
    CHECK(std::is_sorted(sw.begin(), sw.end()));
    CHECK(std::adjacent_find(sw.begin(), sw.end()) == sw.end());
    CHECK(is_stopword("with"));
    CHECK_FALSE(is_stopword("cat"));
}

TEST_CASE("non-ASCII bytes stay inside tokens")
{
    CHECK(tokenize("Café über") == V{"café", "über"});
}

TEST_CASE("overlong tokens are dropped")
{
    std::string const long_token(65, 'x');
    std::string const ok_token(64, 'y');
    CHECK(tokenize(long_token + " " + ok_token) == V{ok_token});
}

TEST_CASE("empty and separator-only input")
{
    CHECK(tokenize("").empty());
    CHECK(tokenize(" \t\n,.;").empty());
}

TEST_CASE("sentence and hyphenated compound")
{
    CHECK(tokenize("The cat sat.") == V{"cat", "sat"});
    CHECK(tokenize("BM25-based re-ranking") == V{"bm25", "based", "re", "ranking"});
}
