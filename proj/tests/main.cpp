#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "swarmstl/log.hpp"

int main(int argc, char** argv) {
  swarmstl::init_logging();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
