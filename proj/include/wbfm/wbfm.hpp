#pragma once

// Umbrella header: the whole library.

#include "wbfm/common.hpp"
#include "wbfm/covariance.hpp"
#include "wbfm/estimator.hpp"
#include "wbfm/experiment.hpp"
#include "wbfm/fft.hpp"
#include "wbfm/io.hpp"
#include "wbfm/model.hpp"
#include "wbfm/rng.hpp"
#include "wbfm/scorer.hpp"
#include "wbfm/spectrum.hpp"
#include "wbfm/spectrum_est.hpp"
#include "wbfm/tf.hpp"
#include "wbfm/track.hpp"
