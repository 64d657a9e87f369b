#pragma once

#include "parastab/control.hpp"
#include "parastab/dense.hpp"
#include "parastab/error.hpp"
#include "parastab/grid.hpp"
#include "parastab/integrator.hpp"
#include "parastab/linalg.hpp"
#include "parastab/nonlinearity.hpp"
#include "parastab/norms.hpp"
#include "parastab/operator.hpp"
#include "parastab/optimizer.hpp"
#include "parastab/oracle.hpp"
#include "parastab/parallel.hpp"
#include "parastab/problem.hpp"
#include "parastab/projected_descent.hpp"
#include "parastab/riccati.hpp"
#include "parastab/sampling.hpp"
#include "parastab/second_order.hpp"
#include "parastab/stabilization.hpp"
#include "parastab/trajectory.hpp"
#include "parastab/value_function.hpp"
