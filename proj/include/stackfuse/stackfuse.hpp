#pragma once

// Stacked-ensemble engine: fuse per-model class probabilities and train
// meta-classifiers on them.

#include "stackfuse/core.hpp"
#include "stackfuse/dataio.hpp"
#include "stackfuse/ensembles.hpp"
#include "stackfuse/fusion.hpp"
#include "stackfuse/learners.hpp"
#include "stackfuse/manifest.hpp"
#include "stackfuse/meta_model.hpp"
#include "stackfuse/metrics.hpp"
#include "stackfuse/pipeline.hpp"
#include "stackfuse/synth.hpp"
