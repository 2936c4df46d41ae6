#pragma once

#include "borrowsim/posterior.hpp"

#include <vector>

namespace borrowsim {

/// Normal component carrying an unnormalized log weight (or, after
/// normalization, a plain weight in `weight`).
struct WeightedNormal {
    double log_weight = 0.0;
    double mean = 0.0;
    double sd = 1.0;
    double weight = 0.0;
};

/// Fills `weight` so the weights sum to one and drops components below 1e-17
/// of the largest. Input order is preserved.
std::vector<WeightedNormal> normalize_log_weights(const std::vector<WeightedNormal>& comps);

/// Tabulates a many-component normal mixture on `points` nodes spanning the
/// exact mixture mean +/- `width_sds` sds.
GridDensity tabulate_mixture(const std::vector<WeightedNormal>& comps, std::size_t points = 4001,
                             double width_sds = 9.0);

}  // namespace borrowsim
