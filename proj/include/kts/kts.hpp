#pragma once

// Umbrella header.

#include "kts/baselines.hpp"
#include "kts/bench.hpp"
#include "kts/blocking.hpp"
#include "kts/error.hpp"
#include "kts/io.hpp"
#include "kts/kernel.hpp"
#include "kts/matrix.hpp"
#include "kts/moments.hpp"
#include "kts/parallel.hpp"
#include "kts/report.hpp"
#include "kts/rng.hpp"
#include "kts/simulate.hpp"
#include "kts/teststat.hpp"
