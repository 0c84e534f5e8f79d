#pragma once

#include <string_view>

namespace dndx {

enum class LogLevel { debug, info, warning, error };

/// Messages below this level are dropped. Defaults to info.
void set_log_level(LogLevel level);
void log(LogLevel level, std::string_view message);

inline void log_info(std::string_view m) { log(LogLevel::info, m); }
inline void log_warning(std::string_view m) { log(LogLevel::warning, m); }

}  // namespace dndx
