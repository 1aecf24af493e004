// Umbrella header.
#pragma once

#include "okflow/config.hpp"
#include "okflow/diagnostics.hpp"
#include "okflow/fem.hpp"
#include "okflow/harness.hpp"
#include "okflow/mesh.hpp"
#include "okflow/model.hpp"
#include "okflow/operators.hpp"
#include "okflow/output.hpp"
#include "okflow/quadrature.hpp"
#include "okflow/scheme.hpp"
#include "okflow/solve.hpp"
#include "okflow/types.hpp"
