#pragma once

#include "xolap/binding.hpp"
#include "xolap/decimal.hpp"
#include "xolap/error.hpp"
#include "xolap/matcher.hpp"
#include "xolap/mdmodel.hpp"
#include "xolap/pattern.hpp"
#include "xolap/rollup.hpp"
#include "xolap/xmltree.hpp"
