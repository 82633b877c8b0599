#pragma once

#include "mstpp/availability.hpp"
#include "mstpp/check.hpp"
#include "mstpp/config.hpp"
#include "mstpp/derived.hpp"
#include "mstpp/error.hpp"
#include "mstpp/geo_raster.hpp"
#include "mstpp/hmc.hpp"
#include "mstpp/likelihood.hpp"
#include "mstpp/rng.hpp"
#include "mstpp/selection.hpp"
#include "mstpp/simulate.hpp"
#include "mstpp/telemetry.hpp"
