#pragma once

// Mixtures of projected Gaussians over S3 x R3: quaternion and dual
// quaternion algebra, tangent charts with central projection, projected
// Gaussian base elements, mixture operations (fuse, merge, prune, compose,
// EM fit), seeded Monte Carlo integration, and the simulated localization
// pipeline.

#include "mopg/errors.hpp"
#include "mopg/gaussian.hpp"
#include "mopg/io.hpp"
#include "mopg/mixture.hpp"
#include "mopg/montecarlo.hpp"
#include "mopg/pipeline.hpp"
#include "mopg/projected_gaussian.hpp"
#include "mopg/quaternion.hpp"
#include "mopg/rng.hpp"
#include "mopg/tangent_space.hpp"
