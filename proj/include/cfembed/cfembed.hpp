#pragma once

// Counterfactual mean embeddings with Gaussian-process uncertainty, plus the
// synthetic calibration study used to compare the estimators.

#include "cfembed/common.hpp"
#include "cfembed/kernel.hpp"
#include "cfembed/solve.hpp"
#include "cfembed/embedding.hpp"
#include "cfembed/bayes.hpp"
#include "cfembed/estimators.hpp"
#include "cfembed/synthetic.hpp"
#include "cfembed/calibration.hpp"
#include "cfembed/io.hpp"
