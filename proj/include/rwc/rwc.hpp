#pragma once

#include "classifier.hpp"
#include "error.hpp"
#include "experiments.hpp"
#include "graph.hpp"
#include "model.hpp"
#include "normal.hpp"
#include "parallel.hpp"
#include "precision.hpp"
#include "rng.hpp"
#include "sparse.hpp"
#include "theory.hpp"
#include "threshold.hpp"
