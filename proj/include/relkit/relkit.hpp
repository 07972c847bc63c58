#pragma once

#include "relkit/analysis.hpp"
#include "relkit/control.hpp"
#include "relkit/core.hpp"
#include "relkit/dynamics.hpp"
#include "relkit/errors.hpp"
#include "relkit/linearize.hpp"
#include "relkit/sim.hpp"
