#pragma once

#include "lassodist/error.hpp"
#include "lassodist/normal.hpp"
#include "lassodist/rng.hpp"
#include "lassodist/parallel.hpp"
#include "lassodist/covariance.hpp"
#include "lassodist/data.hpp"
#include "lassodist/solvers.hpp"
#include "lassodist/fixed_point.hpp"
#include "lassodist/inference.hpp"
#include "lassodist/width.hpp"
#include "lassodist/io.hpp"
#include "lassodist/experiments.hpp"
