#pragma once

#include "superalign/bench.hpp"
#include "superalign/cloud_io.hpp"
#include "superalign/config.hpp"
#include "superalign/core.hpp"
#include "superalign/descriptors.hpp"
#include "superalign/feature_io.hpp"
#include "superalign/geometry.hpp"
#include "superalign/icp.hpp"
#include "superalign/kabsch.hpp"
#include "superalign/kabsch_grad.hpp"
#include "superalign/kdtree.hpp"
#include "superalign/losses.hpp"
#include "superalign/matching.hpp"
#include "superalign/metrics.hpp"
#include "superalign/pipeline.hpp"
#include "superalign/ransac.hpp"
#include "superalign/superpoints.hpp"
#include "superalign/synthetic.hpp"
#include "superalign/toy_fit.hpp"
