#pragma once

#include "fris/channel.hpp"    // IWYU pragma: export
#include "fris/common.hpp"     // IWYU pragma: export
#include "fris/direction.hpp"  // IWYU pragma: export
#include "fris/metrics.hpp"    // IWYU pragma: export
#include "fris/optimize.hpp"   // IWYU pragma: export
#include "fris/pattern_opt.hpp"  // IWYU pragma: export
#include "fris/rng.hpp"        // IWYU pragma: export
#include "fris/spherical_harmonics.hpp"  // IWYU pragma: export
#include "fris/surface.hpp"    // IWYU pragma: export
#include "fris/wmmse.hpp"      // IWYU pragma: export
