#pragma once

#include "nonplanar/analytic_cone.hpp"
#include "nonplanar/basis.hpp"
#include "nonplanar/bessel.hpp"
#include "nonplanar/classical.hpp"
#include "nonplanar/config.hpp"
#include "nonplanar/core.hpp"
#include "nonplanar/eigensolver.hpp"
#include "nonplanar/fdm.hpp"
#include "nonplanar/geometry.hpp"
#include "nonplanar/io.hpp"
#include "nonplanar/quadrature.hpp"
#include "nonplanar/run.hpp"
#include "nonplanar/spectra.hpp"
