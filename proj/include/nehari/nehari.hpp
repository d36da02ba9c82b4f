#pragma once

#include "nehari/audit.hpp"
#include "nehari/bloch.hpp"
#include "nehari/commands.hpp"
#include "nehari/config.hpp"
#include "nehari/errors.hpp"
#include "nehari/lattice.hpp"
#include "nehari/nonlinearity.hpp"
#include "nehari/solver.hpp"
#include "nehari/spectral.hpp"
#include "nehari/variational.hpp"
