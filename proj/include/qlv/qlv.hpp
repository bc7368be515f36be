#pragma once

// Umbrella header for the whole library.

#include "qlv/constitutive.hpp"
#include "qlv/error.hpp"
#include "qlv/fit.hpp"
#include "qlv/hereditary.hpp"
#include "qlv/kernels.hpp"
#include "qlv/network.hpp"
#include "qlv/protocols.hpp"
#include "qlv/series.hpp"
#include "qlv/special.hpp"
#include "qlv/io/cli.hpp"
#include "qlv/io/config.hpp"
#include "qlv/io/csv.hpp"
