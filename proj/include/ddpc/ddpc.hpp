#pragma once

#include "ddpc/control.hpp"
#include "ddpc/cost.hpp"
#include "ddpc/errors.hpp"
#include "ddpc/hankel.hpp"
#include "ddpc/kalman.hpp"
#include "ddpc/linalg.hpp"
#include "ddpc/lti.hpp"
#include "ddpc/predictors/arx.hpp"
#include "ddpc/predictors/common.hpp"
#include "ddpc/predictors/innovation.hpp"
#include "ddpc/predictors/iv.hpp"
#include "ddpc/predictors/model.hpp"
#include "ddpc/predictors/regularized.hpp"
#include "ddpc/predictors/spc.hpp"
#include "ddpc/random.hpp"
#include "ddpc/trajectory_io.hpp"
