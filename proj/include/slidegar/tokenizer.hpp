#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slidegar {

inline constexpr std::size_t kMaxTokenLength = 64;

/// The built-in English stopword list (the classic 33-word Lucene set), sorted.
std::span<std::string_view const> stopwords();
bool is_stopword(std::string_view term);

/// Splits on non-alphanumeric ASCII bytes (bytes >= 0x80 count as word characters),
/// lowercases ASCII, drops stopwords and tokens longer than 64 bytes.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace slidegar
