#pragma once

#include "tsec/portfolio/backtest.hpp"
#include "tsec/portfolio/prices.hpp"
#include "tsec/portfolio/strategies.hpp"
