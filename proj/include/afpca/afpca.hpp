#pragma once

#include "afpca/bench.hpp"
#include "afpca/covariance.hpp"
#include "afpca/data_model.hpp"
#include "afpca/eigen_decomposition.hpp"
#include "afpca/errors.hpp"
#include "afpca/io.hpp"
#include "afpca/kernel_smoother.hpp"
#include "afpca/moments.hpp"
#include "afpca/pipeline.hpp"
#include "afpca/presmoothing.hpp"
#include "afpca/regularity.hpp"
#include "afpca/risk_bounds.hpp"
#include "afpca/simulator.hpp"
