#pragma once

#include "daavm/config.hpp"
#include "daavm/design.hpp"
#include "daavm/diagnostics.hpp"
#include "daavm/ergm.hpp"
#include "daavm/io.hpp"
#include "daavm/optim.hpp"
#include "daavm/param.hpp"
#include "daavm/pointproc.hpp"
#include "daavm/potts.hpp"
#include "daavm/prior.hpp"
#include "daavm/proposal.hpp"
#include "daavm/rng.hpp"
#include "daavm/samplers.hpp"
#include "daavm/sir.hpp"
#include "daavm/surrogate.hpp"
