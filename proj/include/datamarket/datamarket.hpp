#pragma once

// Umbrella header for the data-market library.

#include "allocation.hpp"
#include "core.hpp"
#include "division.hpp"
#include "engine.hpp"
#include "harness.hpp"
#include "prediction.hpp"
#include "pricing.hpp"
#include "revenue.hpp"
#include "rng.hpp"
