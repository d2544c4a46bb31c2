#pragma once

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace se {

using Index = std::int64_t;
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}

template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  format_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string str_cat(const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  return os.str();
}

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  throw Error(str_cat(args...));
}

#define SE_CHECK(cond, ...)               \
  do {                                    \
    if (!(cond)) ::se::fail(__VA_ARGS__); \
  } while (0)

// Log verbosity comes from the SE_LOG_LEVEL env var: error, info (default), debug.
enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("SE_LOG_LEVEL");
    if (env == nullptr) return LogLevel::kInfo;
    const std::string s(env);
    if (s == "error") return LogLevel::kError;
    if (s == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

template <typename... Args>
void log_at(LogLevel level, const char* tag, const Args&... args) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  std::cerr << tag << str_cat(args...) << std::endl;
}

// Warnings are always emitted.
template <typename... Args>
void log_warn(const Args&... args) {
  log_at(LogLevel::kError, "[warn] ", args...);
}
template <typename... Args>
void log_info(const Args&... args) {
  log_at(LogLevel::kInfo, "[info] ", args...);
}
template <typename... Args>
void log_debug(const Args&... args) {
  log_at(LogLevel::kDebug, "[debug] ", args...);
}

inline std::string shape_str(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

}  // namespace se
