#pragma once

#include "bbic/algorithm.hpp"
#include "bbic/cost.hpp"
#include "bbic/counterexamples.hpp"
#include "bbic/curves.hpp"
#include "bbic/distribution.hpp"
#include "bbic/errors.hpp"
#include "bbic/ideal.hpp"
#include "bbic/oracle_model.hpp"
#include "bbic/payments.hpp"
#include "bbic/prior.hpp"
#include "bbic/random.hpp"
#include "bbic/types.hpp"
#include "bbic/verify.hpp"
#include "bbic/zoo.hpp"
