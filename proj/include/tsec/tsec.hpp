#pragma once

#include "tsec/arm_space.hpp"
#include "tsec/bandit.hpp"
#include "tsec/benchmarks.hpp"
#include "tsec/errors.hpp"
#include "tsec/ground_truth.hpp"
#include "tsec/probit_model.hpp"
#include "tsec/random.hpp"
#include "tsec/tsec_engine.hpp"
