#pragma once

#include "capcon/analysis.hpp"
#include "capcon/assembly.hpp"
#include "capcon/cholesky.hpp"
#include "capcon/dense.hpp"
#include "capcon/eigen.hpp"
#include "capcon/error.hpp"
#include "capcon/fractional.hpp"
#include "capcon/mesh.hpp"
#include "capcon/minres.hpp"
#include "capcon/ordering.hpp"
#include "capcon/sparse.hpp"
#include "capcon/systems.hpp"
