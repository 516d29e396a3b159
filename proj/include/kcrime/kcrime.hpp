#pragma once

#include "kcrime/coils.hpp"
#include "kcrime/crime.hpp"
#include "kcrime/dft.hpp"
#include "kcrime/errors.hpp"
#include "kcrime/grid.hpp"
#include "kcrime/io.hpp"
#include "kcrime/kernel.hpp"
#include "kcrime/phantom.hpp"
#include "kcrime/recon.hpp"
