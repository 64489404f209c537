#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace ncsmpc::log {

enum class Level { quiet = 0, warn = 1, info = 2, debug = 3 };

/// Verbosity from the NMPC_LOG environment variable (quiet|warn|info|debug or 0-3);
/// defaults to warn.
inline Level level()
{
  static const Level lvl = [] {
    const char * env = std::getenv("NMPC_LOG");
    if (env == nullptr) { return Level::warn; }
    const std::string v(env);
    if (v == "quiet" || v == "0") { return Level::quiet; }
    if (v == "info" || v == "2") { return Level::info; }
    if (v == "debug" || v == "3") { return Level::debug; }
    return Level::warn;
  }();
  return lvl;
}

template<typename... Args>
void write(Level lvl, const char * tag, const Args &... args)
{
  if (static_cast<int>(lvl) > static_cast<int>(level())) { return; }
  std::ostringstream os;
  os << '[' << tag << "] ";
  (os << ... << args);
  os << '\n';
  std::cerr << os.str();
}

template<typename... Args> void warn(const Args &... args) { write(Level::warn, "warn", args...); }
template<typename... Args> void info(const Args &... args) { write(Level::info, "info", args...); }
template<typename... Args> void debug(const Args &... args) { write(Level::debug, "debug", args...); }

}  // namespace ncsmpc::log
