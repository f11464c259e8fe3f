#pragma once

#include "fedstone/config.hpp"
#include "fedstone/corruption/corruption.hpp"
#include "fedstone/data/dataset.hpp"
#include "fedstone/data/manifest.hpp"
#include "fedstone/data/partition.hpp"
#include "fedstone/data/transforms.hpp"
#include "fedstone/federation/aggregation.hpp"
#include "fedstone/federation/server.hpp"
#include "fedstone/federation/training.hpp"
#include "fedstone/federation/transport.hpp"
#include "fedstone/orchestrator/experiment.hpp"
#include "fedstone/orchestrator/manifest.hpp"
#include "fedstone/orchestrator/selection.hpp"
#include "fedstone/tensor/adam.hpp"
#include "fedstone/tensor/checkpoint.hpp"
#include "fedstone/tensor/model.hpp"
#include "fedstone/tensor/parameter_vector.hpp"
