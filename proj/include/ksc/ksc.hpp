#pragma once

// Umbrella header for the kriging-based soft classification library.

#include "ksc/assess.hpp"
#include "ksc/baselines.hpp"
#include "ksc/errors.hpp"
#include "ksc/kbsc.hpp"
#include "ksc/kriging.hpp"
#include "ksc/radiometry.hpp"
#include "ksc/raster.hpp"
#include "ksc/signatures.hpp"
#include "ksc/synth.hpp"
#include "ksc/variogram.hpp"
