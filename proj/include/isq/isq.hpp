#pragma once

// Everything: numerics, model, spectra, flow, propagator, scattering, paths, I/O.

#include "isq/classical.hpp"
#include "isq/cli.hpp"
#include "isq/core.hpp"
#include "isq/error.hpp"
#include "isq/io.hpp"
#include "isq/numeric.hpp"
#include "isq/parallel.hpp"
#include "isq/propagator.hpp"
#include "isq/rgflow.hpp"
#include "isq/scattering.hpp"
#include "isq/specfun.hpp"
#include "isq/spectrum.hpp"
