#pragma once

#include "spawntrack/app.hpp"
#include "spawntrack/assignment.hpp"
#include "spawntrack/association.hpp"
#include "spawntrack/dynamics.hpp"
#include "spawntrack/inference.hpp"
#include "spawntrack/io.hpp"
#include "spawntrack/metrics.hpp"
#include "spawntrack/priors.hpp"
#include "spawntrack/random.hpp"
#include "spawntrack/simulator.hpp"
#include "spawntrack/tracks.hpp"

namespace spawntrack {

#ifdef SPAWNTRACK_VERSION
inline constexpr const char* version = SPAWNTRACK_VERSION;
#else
inline constexpr const char* version = "unknown";
#endif

}  // namespace spawntrack
