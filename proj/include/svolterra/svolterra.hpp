#pragma once

#include "brownian.hpp"
#include "harness.hpp"
#include "kernel.hpp"
#include "parallel.hpp"
#include "problem.hpp"
#include "random.hpp"
#include "schemes.hpp"
#include "special_functions.hpp"
#include "trajectory.hpp"
