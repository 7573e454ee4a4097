#pragma once

#include "degenode/error.hpp"
#include "degenode/model.hpp"
#include "degenode/dynamics.hpp"
#include "degenode/dopri.hpp"
#include "degenode/integrator.hpp"
#include "degenode/analysis.hpp"
#include "degenode/verification.hpp"
#include "degenode/scenarios.hpp"
#include "degenode/config.hpp"
#include "degenode/io.hpp"
#include "degenode/experiment.hpp"
#include "degenode/suites.hpp"
