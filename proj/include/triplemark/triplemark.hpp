#pragma once

#include "triplemark/core.hpp"
#include "triplemark/error.hpp"
#include "triplemark/inference.hpp"
#include "triplemark/loglinear.hpp"
#include "triplemark/mle.hpp"
#include "triplemark/mtb.hpp"
#include "triplemark/multinomial.hpp"
#include "triplemark/optimize.hpp"
#include "triplemark/simulation.hpp"
#include "triplemark/tbm.hpp"
