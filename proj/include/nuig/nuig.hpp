#pragma once

#include "nuig/attribution.hpp"
#include "nuig/bench.hpp"
#include "nuig/builtin_models.hpp"
#include "nuig/config.hpp"
#include "nuig/convergence.hpp"
#include "nuig/error.hpp"
#include "nuig/finite_difference.hpp"
#include "nuig/image.hpp"
#include "nuig/model.hpp"
#include "nuig/path.hpp"
#include "nuig/report.hpp"
#include "nuig/schedule.hpp"
#include "nuig/scheduler.hpp"
#include "nuig/tensor.hpp"
#include "nuig/text.hpp"
#include "nuig/weights_io.hpp"
#include "nuig/work_counters.hpp"
