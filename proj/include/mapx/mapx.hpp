#pragma once

#include "mapx/baseline_wsn.hpp"
#include "mapx/config.hpp"
#include "mapx/estimate.hpp"
#include "mapx/experiment.hpp"
#include "mapx/fft.hpp"
#include "mapx/field.hpp"
#include "mapx/heatmap.hpp"
#include "mapx/interchange.hpp"
#include "mapx/metrics.hpp"
#include "mapx/mlp.hpp"
#include "mapx/phy.hpp"
#include "mapx/random.hpp"
#include "mapx/recon_dnn.hpp"
#include "mapx/recon_linear.hpp"
#include "mapx/scenario.hpp"
