#pragma once

#include "posecut/candidates.hpp"
#include "posecut/class_set.hpp"
#include "posecut/error.hpp"
#include "posecut/eval.hpp"
#include "posecut/exact_solver.hpp"
#include "posecut/geometry.hpp"
#include "posecut/ilp.hpp"
#include "posecut/incremental.hpp"
#include "posecut/io.hpp"
#include "posecut/local_search.hpp"
#include "posecut/model.hpp"
#include "posecut/pairwise.hpp"
#include "posecut/pairwise_io.hpp"
#include "posecut/pipeline.hpp"
#include "posecut/render.hpp"
#include "posecut/rng.hpp"
#include "posecut/synth.hpp"
