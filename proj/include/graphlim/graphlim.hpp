#pragma once

// Everything except the command-line front end (graphlim/cli.hpp).

#include "graphlim/colorings.hpp"
#include "graphlim/densities.hpp"
#include "graphlim/energies.hpp"
#include "graphlim/errors.hpp"
#include "graphlim/format.hpp"
#include "graphlim/graph.hpp"
#include "graphlim/io.hpp"
#include "graphlim/kernel.hpp"
#include "graphlim/matrix.hpp"
#include "graphlim/nd_harness.hpp"
#include "graphlim/norms.hpp"
#include "graphlim/parallel.hpp"
#include "graphlim/partition.hpp"
#include "graphlim/regularity.hpp"
#include "graphlim/rng.hpp"
#include "graphlim/sampling.hpp"
