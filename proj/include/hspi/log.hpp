#ifndef HSPI_LOG_HPP
#define HSPI_LOG_HPP

#include <string_view>

namespace hspi::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

/// Reads HSPI_LOG (debug|info|warn|error|off); defaults to warn.
void init_from_env();
void set_level(Level level);
Level level();

void write(Level level, std::string_view msg);

inline void debug(std::string_view msg) { write(Level::Debug, msg); }
inline void info(std::string_view msg) { write(Level::Info, msg); }
inline void warn(std::string_view msg) { write(Level::Warn, msg); }
inline void error(std::string_view msg) { write(Level::Error, msg); }

} // namespace hspi::log

#endif // HSPI_LOG_HPP
