#pragma once

// Umbrella header for the prediction-interval toolkit.

#include "ubpi/autodiff.hpp"
#include "ubpi/data.hpp"
#include "ubpi/ensemble.hpp"
#include "ubpi/losses.hpp"
#include "ubpi/metrics.hpp"
#include "ubpi/model.hpp"
#include "ubpi/rng.hpp"
#include "ubpi/svg_plot.hpp"
#include "ubpi/trainer.hpp"
