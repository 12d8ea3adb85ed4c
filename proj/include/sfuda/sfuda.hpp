#pragma once

// Scene-flow domain adaptation toolkit: synthetic LiDAR scene generation with
// exact rigid-body flow annotation, pseudo-label refinement (deformation
// regularization + correspondence refinement), and a mean-teacher adaptation
// loop around a small differentiable flow estimator.

#include "sfuda/clustering.hpp"
#include "sfuda/config.hpp"
#include "sfuda/errors.hpp"
#include "sfuda/estimator.hpp"
#include "sfuda/experiment.hpp"
#include "sfuda/geometry.hpp"
#include "sfuda/io.hpp"
#include "sfuda/knn.hpp"
#include "sfuda/metrics.hpp"
#include "sfuda/pseudo_label.hpp"
#include "sfuda/random.hpp"
#include "sfuda/synthgen.hpp"
#include "sfuda/uda.hpp"
