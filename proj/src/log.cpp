#include "hspi/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>

namespace hspi::log {

namespace {
std::atomic<Level> g_level{Level::Warn};
std::mutex g_mutex;

const char* tag(Level l)
{
    switch (l) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    default: return "";
    }
}
} // namespace

void init_from_env()
{
    const char* env = std::getenv("HSPI_LOG");
    if (env == nullptr)
        return;
    const std::string v(env);
    if (v == "debug") set_level(Level::Debug);
    else if (v == "info") set_level(Level::Info);
    else if (v == "warn") set_level(Level::Warn);
    else if (v == "error") set_level(Level::Error);
    else if (v == "off") set_level(Level::Off);
}

void set_level(Level level) { g_level = level; }

Level level() { return g_level; }

void write(Level l, std::string_view msg)
{
    if (l < g_level.load() || g_level.load() == Level::Off)
        return;
    std::lock_guard<std::mutex> lock(g_mutex);
    std::fprintf(stderr, "[hspi %s] %.*s\n", tag(l), static_cast<int>(msg.size()), msg.data());
}

} // namespace hspi::log
