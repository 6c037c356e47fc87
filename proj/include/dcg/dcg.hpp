#pragma once

#include "dcg/error.hpp"
#include "dcg/rng.hpp"
#include "dcg/state_space.hpp"
#include "dcg/graph.hpp"
#include "dcg/parameters.hpp"
#include "dcg/model.hpp"
#include "dcg/graph_semantics.hpp"
#include "dcg/inference.hpp"
#include "dcg/dataset.hpp"
#include "dcg/optim.hpp"
#include "dcg/projected_qn.hpp"
#include "dcg/gauge.hpp"
#include "dcg/estimation.hpp"
#include "dcg/structure_learning.hpp"
#include "dcg/baselines.hpp"
#include "dcg/io.hpp"
#include "dcg/experiments.hpp"
