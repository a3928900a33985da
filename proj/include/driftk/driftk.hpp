#pragma once

#include "driftk/concentration.hpp"
#include "driftk/controller.hpp"
#include "driftk/drift.hpp"
#include "driftk/gap_bounds.hpp"
#include "driftk/harness.hpp"
#include "driftk/objective.hpp"
#include "driftk/params.hpp"
#include "driftk/sgd.hpp"
#include "driftk/synth.hpp"
