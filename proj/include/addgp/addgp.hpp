#pragma once

#include "addgp/benchmark.hpp"
#include "addgp/data.hpp"
#include "addgp/error.hpp"
#include "addgp/esp.hpp"
#include "addgp/gp.hpp"
#include "addgp/hyperopt.hpp"
#include "addgp/kernel.hpp"
#include "addgp/lbfgs.hpp"
#include "addgp/model_io.hpp"
