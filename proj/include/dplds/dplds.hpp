#pragma once

#include "dplds/covariance.hpp"
#include "dplds/errors.hpp"
#include "dplds/experiment.hpp"
#include "dplds/noise_design.hpp"
#include "dplds/privacy.hpp"
#include "dplds/random.hpp"
#include "dplds/special_functions.hpp"
#include "dplds/state_space.hpp"
