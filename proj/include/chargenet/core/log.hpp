#pragma once

#include <iostream>
#include <string_view>

namespace chargenet::log {

enum class Level { Debug = 0, Info = 1, Warning = 2, Error = 3, Silent = 4 };

inline Level& threshold() {
  static Level level = Level::Info;
  return level;
}

inline void write(Level level, std::string_view tag, std::string_view message) {
  if (level < threshold()) return;
  std::cerr << '[' << tag << "] " << message << '\n';
}

inline void info(std::string_view message) { write(Level::Info, "info", message); }
inline void warn(std::string_view message) { write(Level::Warning, "warn", message); }
inline void error(std::string_view message) { write(Level::Error, "error", message); }

}  // namespace chargenet::log
