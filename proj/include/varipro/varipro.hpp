#pragma once

// Umbrella header.

#include "varipro/convex.hpp"
#include "varipro/deq.hpp"
#include "varipro/errors.hpp"
#include "varipro/fidelity.hpp"
#include "varipro/grid.hpp"
#include "varipro/io.hpp"
#include "varipro/linalg.hpp"
#include "varipro/metrics.hpp"
#include "varipro/operators.hpp"
#include "varipro/pnp.hpp"
#include "varipro/regularizers.hpp"
#include "varipro/segmentation.hpp"
#include "varipro/solvers.hpp"
