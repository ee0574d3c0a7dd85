#ifndef PURELU_PURELU_HPP
#define PURELU_PURELU_HPP

#include "purelu/analysis.hpp"
#include "purelu/config.hpp"
#include "purelu/equilibrate.hpp"
#include "purelu/errors.hpp"
#include "purelu/matrix.hpp"
#include "purelu/model.hpp"
#include "purelu/pinv.hpp"
#include "purelu/purify.hpp"
#include "purelu/rng.hpp"
#include "purelu/threads.hpp"
#include "purelu/verify.hpp"

#endif  // PURELU_PURELU_HPP
