#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "lcl/core/matrix.hpp"

namespace lcl::nonstat {

// Accommodation weights for nonstationary lifelong learning: decide how much
// each past task's replay data still reflects the current world. Three
// schemes: an oracle validity mask, loss drift, and representational drift.

struct DriftInputs {
    // Loss scheme: the current policy's offline loss on the past task's
    // replay, the loss recorded when that task was trained, and a
    // random-policy baseline on the same data.
    double loss_current = 0.0;
    double loss_original = 0.0;
    double loss_random = 0.0;

    // Representation scheme: per-module mean activations under the current
    // policy, at the past task's training time, and under a random policy.
    // Only modules listed in shared_changing enter the product.
    std::vector<Vector> mu_current;
    std::vector<Vector> mu_original;
    std::vector<Vector> mu_random;
    std::vector<std::size_t> shared_changing;
};

struct TaskWeight {
    double w = 1.0;
};

// Three-case rule: w = 1 - delta inside (0, 1), 0 when delta >= 1, 1 when
// delta <= 0.
double clamp_drift(double delta);

// w from loss drift (loss_current - loss_original) / (loss_random -
// loss_original). Throws DegenerateBaseline when the denominator is within
// 1e-12 of zero.
TaskWeight loss_weight(const DriftInputs& in);

// Product over shared changing modules of the per-module clamped weight with
// drift |mu_current - mu_original|^2 / |mu_random - mu_original|^2. An empty
// module set leaves the task fully weighted.
TaskWeight repr_weight(const DriftInputs& in);

// Oracle scheme: the harness says whether the task's components currently
// match the world.
double oracle_weight(bool currently_valid);

// Validated per-task loss scales for accommodation; each task's minibatch
// loss is multiplied by its weight and zero-weight tasks are skipped
// entirely. Tasks absent from the map weigh 1. Throws InvalidConfig outside
// [0, 1].
std::map<std::string, double> apply_weights(const std::map<std::string, double>& weights);

}  // namespace lcl::nonstat
