#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "nuig/error.hpp"

namespace nuig {

/// Stage-1 output of the non-uniform scheduler: equal-width intervals over
/// [0,1], the probability probed at each boundary, the normalized change per
/// interval, and the step count given to each interval.
struct IntervalSchedule {
  std::vector<double> boundaries;
  std::vector<double> boundary_probs;
  std::vector<double> delta_f;
  std::vector<std::size_t> steps;

  std::size_t intervals() const { return steps.size(); }

  std::size_t total_steps() const { return std::accumulate(steps.begin(), steps.end(), std::size_t{0}); }

  void validate() const {
    const std::size_t n = steps.size();
    if (n == 0 || boundaries.size() != n + 1 || boundary_probs.size() != n + 1 || delta_f.size() != n) {
      fail(ErrorKind::config, "interval schedule has inconsistent lengths");
    }
    if (boundaries.front() != 0.0 || boundaries.back() != 1.0) {
      fail(ErrorKind::config, "interval schedule must span exactly [0,1]");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!(boundaries[j] < boundaries[j + 1])) fail(ErrorKind::config, "schedule boundaries must increase");
      if (steps[j] == 0) fail(ErrorKind::config, "every interval needs at least one step");
    }
  }
};

}  // namespace nuig
