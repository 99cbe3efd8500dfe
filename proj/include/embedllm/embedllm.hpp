#pragma once

#include "ablation.hpp"
#include "csv.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "forecast.hpp"
#include "knn.hpp"
#include "mf.hpp"
#include "params_io.hpp"
#include "probing.hpp"
#include "random.hpp"
#include "regression.hpp"
#include "router.hpp"
#include "synthgen.hpp"
