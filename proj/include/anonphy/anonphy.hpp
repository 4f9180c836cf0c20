#pragma once

// Everything in one include.

#include "anonphy/errors.hpp"
#include "anonphy/numerics.hpp"
#include "anonphy/rng.hpp"
#include "anonphy/channel.hpp"
#include "anonphy/conic.hpp"
#include "anonphy/detection.hpp"
#include "anonphy/modulation.hpp"
#include "anonphy/precoding.hpp"
#include "anonphy/simulation.hpp"
#include "anonphy/experiment.hpp"
