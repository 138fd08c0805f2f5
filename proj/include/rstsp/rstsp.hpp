#pragma once

#include "rstsp/batch.hpp"
#include "rstsp/errors.hpp"
#include "rstsp/gcn.hpp"
#include "rstsp/heatmap.hpp"
#include "rstsp/held_karp.hpp"
#include "rstsp/instance.hpp"
#include "rstsp/io.hpp"
#include "rstsp/metrics.hpp"
#include "rstsp/rbs.hpp"
#include "rstsp/rng.hpp"
#include "rstsp/subgraph.hpp"
