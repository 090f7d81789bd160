// Umbrella header for the registration library.

#ifndef QUATRO_QUATRO_HPP
#define QUATRO_QUATRO_HPP

#include "quatro/bench.hpp"
#include "quatro/config.hpp"
#include "quatro/core.hpp"
#include "quatro/features.hpp"
#include "quatro/ground.hpp"
#include "quatro/icp.hpp"
#include "quatro/io.hpp"
#include "quatro/kdtree.hpp"
#include "quatro/pipeline.hpp"
#include "quatro/pruning.hpp"
#include "quatro/random.hpp"
#include "quatro/solver.hpp"
#include "quatro/synth.hpp"

#endif  // QUATRO_QUATRO_HPP
