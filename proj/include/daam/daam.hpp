#pragma once

#include "daam/attribution.hpp"
#include "daam/error.hpp"
#include "daam/export.hpp"
#include "daam/fixture.hpp"
#include "daam/grid.hpp"
#include "daam/png_io.hpp"
#include "daam/pos_stats.hpp"
#include "daam/render.hpp"
#include "daam/rng.hpp"
#include "daam/seg_eval.hpp"
#include "daam/tensor_store.hpp"
