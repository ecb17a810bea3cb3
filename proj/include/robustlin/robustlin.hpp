#pragma once

#include "robustlin/problem.hpp"
#include "robustlin/problem_io.hpp"
#include "robustlin/risk.hpp"
#include "robustlin/oracle.hpp"
#include "robustlin/bounds.hpp"
#include "robustlin/regimes.hpp"
#include "robustlin/estimators.hpp"
#include "robustlin/rmt.hpp"
