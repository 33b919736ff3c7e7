#pragma once

#include "config.hpp"
#include "envelope_geometry.hpp"
#include "errors.hpp"
#include "exact_kernel.hpp"
#include "fd_solver.hpp"
#include "general_kernel.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "operator_core.hpp"
#include "quadrature.hpp"
#include "sab.hpp"
#include "special_functions.hpp"
#include "verification.hpp"
