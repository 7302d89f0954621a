#include "lcl/nonstat/weighting.hpp"

#include <cmath>

#include "lcl/core/errors.hpp"

namespace lcl::nonstat {
namespace {

double squared_distance(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw SliceShapeMismatch("representation sizes differ");
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
    return total;
}

}  // namespace

double clamp_drift(double delta) {
    if (delta >= 1.0) return 0.0;
    if (delta <= 0.0) return 1.0;
    return 1.0 - delta;
}

TaskWeight loss_weight(const DriftInputs& in) {
    const double denom = in.loss_random - in.loss_original;
    if (std::abs(denom) <= 1e-12) throw DegenerateBaseline("loss baseline matches original");
    return {clamp_drift((in.loss_current - in.loss_original) / denom)};
}

TaskWeight repr_weight(const DriftInputs& in) {
    if (in.mu_current.size() != in.mu_original.size() ||
        in.mu_current.size() != in.mu_random.size())
        throw SliceShapeMismatch("module representation counts differ");
    double w = 1.0;
    for (const std::size_t module : in.shared_changing) {
        if (module >= in.mu_current.size())
            throw SelectionOutOfRange("shared module index out of range");
        const double denom = squared_distance(in.mu_random[module], in.mu_original[module]);
        if (denom <= 1e-12) throw DegenerateBaseline("representation baseline matches original");
        const double delta =
            squared_distance(in.mu_current[module], in.mu_original[module]) / denom;
        w *= clamp_drift(delta);
    }
    return {w};
}

double oracle_weight(bool currently_valid) { return currently_valid ? 1.0 : 0.0; }

std::map<std::string, double> apply_weights(const std::map<std::string, double>& weights) {
    for (const auto& [task, w] : weights)
        if (!(w >= 0.0 && w <= 1.0))
            throw InvalidConfig("weight for task " + task + " outside [0, 1]");
    return weights;
}

}  // namespace lcl::nonstat
