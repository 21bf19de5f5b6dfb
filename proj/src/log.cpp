#include "swarmstl/log.hpp"

#include <cstdlib>
#include <spdlog/sinks/stdout_color_sinks.h>

namespace swarmstl {

void init_logging() {
  static bool done = false;
  if (!done) {
    auto logger = spdlog::stderr_color_mt("swarmstl");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    done = true;
  }
  const char* env = std::getenv("SWARMSTL_LOG");
  auto level = spdlog::level::warn;
  if (env && *env) level = spdlog::level::from_str(env);
  spdlog::set_level(level);
}

}  // namespace swarmstl
