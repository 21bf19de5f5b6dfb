#pragma once

#include <spdlog/spdlog.h>

namespace swarmstl {

// Reads SWARMSTL_LOG (trace|debug|info|warn|error|off); default warn.
void init_logging();

}  // namespace swarmstl
