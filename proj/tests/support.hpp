#pragma once

#include <unistd.h>

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "slidegar/corpus_store.hpp"
#include "slidegar/rankers.hpp"

namespace testing {

inline slidegar::CorpusStore make_store(std::vector<std::pair<std::string, std::string>> const &docs)
{
    std::vector<slidegar::Document> out;
    for (auto const &[docno, text] : docs) {
        out.push_back({docno, text});
    }
    return slidegar::CorpusStore(std::move(out));
}

/// d0..d{n-1}, each with a unique token.
inline slidegar::CorpusStore numbered_store(std::size_t n)
{
    std::vector<slidegar::Document> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({"d" + std::to_string(i), "tok" + std::to_string(i)});
    }
    return slidegar::CorpusStore(std::move(out));
}

inline slidegar::Ranking ranking_of(std::vector<std::uint32_t> const &ids)
{
    slidegar::Ranking r;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        r.push_back({slidegar::DocId{ids[i]}, static_cast<double>(ids.size() - i)});
    }
    return r;
}

inline std::vector<std::uint32_t> ids_of(slidegar::Ranking const &r)
{
    std::vector<std::uint32_t> out;
    for (auto const &sd : r) {
        out.push_back(sd.id.value);
    }
    return out;
}

/// Returns whatever the callback produces, including malformed orderings.
class ScriptedRanker final : public slidegar::ListwiseRanker {
   public:
    using Script = std::function<std::optional<std::vector<std::string>>(slidegar::Window const &)>;
    explicit ScriptedRanker(Script s) : script_(std::move(s)) {}
    std::optional<std::vector<std::string>> order(slidegar::Window const &window) override { return script_(window); }

   private:
    Script script_;
};

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(std::string const &name)
{
    auto dir = std::filesystem::temp_directory_path() / ("slidegar_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
