#pragma once

#include "gyrolimit/core.hpp"
#include "gyrolimit/fields.hpp"
#include "gyrolimit/ode.hpp"
#include "gyrolimit/quadrature.hpp"
#include "gyrolimit/fit.hpp"
#include "gyrolimit/parallel.hpp"
#include "gyrolimit/integrators.hpp"
#include "gyrolimit/diagnostics.hpp"
#include "gyrolimit/identities.hpp"
#include "gyrolimit/analysis.hpp"
#include "gyrolimit/io.hpp"
#include "gyrolimit/scenario.hpp"
