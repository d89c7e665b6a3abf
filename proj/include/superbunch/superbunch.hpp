#ifndef SUPERBUNCH_SUPERBUNCH_HPP
#define SUPERBUNCH_SUPERBUNCH_HPP

#include "superbunch/bunches.hpp"
#include "superbunch/conditional.hpp"
#include "superbunch/dicke.hpp"
#include "superbunch/experiment.hpp"
#include "superbunch/expm.hpp"
#include "superbunch/liouvillian.hpp"
#include "superbunch/numeric.hpp"
#include "superbunch/rng.hpp"
#include "superbunch/steady_state.hpp"
#include "superbunch/timescales.hpp"
#include "superbunch/trajectory.hpp"
#include "superbunch/verify.hpp"
#include "superbunch/version.hpp"

#endif // SUPERBUNCH_SUPERBUNCH_HPP
