#pragma once

#include "hcm/bench.hpp"
#include "hcm/error.hpp"
#include "hcm/graph.hpp"
#include "hcm/hop_labels.hpp"
#include "hcm/inference.hpp"
#include "hcm/matrix.hpp"
#include "hcm/model.hpp"
#include "hcm/optim.hpp"
#include "hcm/pipeline.hpp"
#include "hcm/preprocess.hpp"
#include "hcm/rng.hpp"
