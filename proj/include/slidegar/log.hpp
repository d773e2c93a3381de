#pragma once

#include <string_view>

namespace slidegar::log {

enum class Level { debug, info, warn, error, off };

void set_level(Level level);
Level level();

void write(Level level, std::string_view message);

inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }

}  // namespace slidegar::log
