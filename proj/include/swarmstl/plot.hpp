#pragma once

#include <string>

#include "swarmstl/planner.hpp"
#include "swarmstl/runtime.hpp"
#include "swarmstl/scenario.hpp"

namespace swarmstl::viz {

// SVG rendering of regions, obstacles, planned centroid paths with waypoint ellipses,
// and optionally agent trajectories. Either pointer may be null. Throws for d != 2.
std::string plot_svg(const Scenario& sc, const plan::PlanPath* path, const rt::Trace* trace);

// Vertices of a 2-D polytope clipped to a box, counter-clockwise; empty if the set is empty.
std::vector<Vec> polygon_vertices(const Polytope& poly, const Box& clip);

}  // namespace swarmstl::viz
