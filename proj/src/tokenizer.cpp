#include "slidegar/tokenizer.hpp"

#include <algorithm>
#include <array>

namespace slidegar {

namespace {

constexpr std::array<std::string_view, 33> kStopwords = {
    "a",    "an",    "and",   "are",  "as",    "at",   "be",   "but",  "by",   "for",  "if",
    "in",   "into",  "is",    "it",   "no",    "not",  "of",   "on",   "or",   "such", "that",
    "the",  "their", "then",  "there", "these", "they", "this", "to",   "was",  "will", "with",
};

static_assert(std::is_sorted(kStopwords.begin(), kStopwords.end()));

bool is_word_byte(unsigned char c)
{
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::span<std::string_view const> stopwords() { return kStopwords; }

bool is_stopword(std::string_view term) { return std::binary_search(kStopwords.begin(), kStopwords.end(), term); }

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        std::size_t const start = i;
        while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        if (i == start || i - start > kMaxTokenLength) {
            continue;
        }
        std::string tok(text.substr(start, i - start));
        for (auto &c : tok) {
            if (c >= 'A' && c <= 'Z') {
                c = static_cast<char>(c - 'A' + 'a');
            }
        }
        if (!is_stopword(tok)) {
            tokens.push_back(std::move(tok));
        }
    }
    return tokens;
}

}  // namespace slidegar
