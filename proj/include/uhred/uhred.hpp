#pragma once

#include "uhred/clustering.hpp"
#include "uhred/cube.hpp"
#include "uhred/error.hpp"
#include "uhred/export.hpp"
#include "uhred/layers.hpp"
#include "uhred/metrics.hpp"
#include "uhred/model.hpp"
#include "uhred/model_io.hpp"
#include "uhred/phantom.hpp"
#include "uhred/training.hpp"
