#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace slidegar {

/// Dense internal document id, assigned in ingestion order.
struct DocId {
    std::uint32_t value = 0;

    constexpr DocId() = default;
    constexpr explicit DocId(std::uint32_t v) : value(v) {}

    friend constexpr auto operator<=>(DocId, DocId) = default;
};

/// Marks an empty neighbour slot in fixed-width graph rows.
inline constexpr std::uint32_t kNoNeighbor = std::numeric_limits<std::uint32_t>::max();

struct ScoredDoc {
    DocId id;
    double score = 0.0;

    friend bool operator==(ScoredDoc const &, ScoredDoc const &) = default;
};

/// Ordered best-first. Every producer in this library breaks score ties by DocId ascending.
using Ranking = std::vector<ScoredDoc>;

struct Query {
    std::string qid;
    std::string text;
};

/// Total order used everywhere a ranking is materialized: score desc, then DocId asc.
inline bool ranks_before(ScoredDoc const &a, ScoredDoc const &b)
{
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.id < b.id;
}

class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; the message carries the file position.
class ParseError : public Error {
   public:
    using Error::Error;
};

class ConfigError : public Error {
   public:
    using Error::Error;
};

}  // namespace slidegar

template <>
struct std::hash<slidegar::DocId> {
    std::size_t operator()(slidegar::DocId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
