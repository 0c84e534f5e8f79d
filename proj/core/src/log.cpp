#include "dndx/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace dndx {

namespace {
std::atomic<LogLevel> g_level{LogLevel::info};
std::mutex g_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_level = level; }

void log(LogLevel level, std::string_view message) {
  if (level < g_level.load()) return;
  static constexpr const char* kTags[] = {"debug", "info", "warning", "error"};
  std::lock_guard lock(g_mutex);
  std::clog << "[" << kTags[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace dndx
