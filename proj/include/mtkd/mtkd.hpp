#ifndef MTKD_MTKD_HPP
#define MTKD_MTKD_HPP

#include "mtkd/alignment.hpp"
#include "mtkd/calibration.hpp"
#include "mtkd/distill_targets.hpp"
#include "mtkd/error.hpp"
#include "mtkd/losses.hpp"
#include "mtkd/prob_core.hpp"
#include "mtkd/temp_fit.hpp"
#include "mtkd/toy_model.hpp"

#endif  // MTKD_MTKD_HPP
