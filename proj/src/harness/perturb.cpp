#include <algorithm>
#include <cmath>

#include "lcl/harness/harness.hpp"

namespace lcl::harness {

namespace {

bool has_shift(const PerturbationConfig& p) {
    return p.kind == "cyclical-target-shift" || p.kind == "composite";
}

bool has_degradation(const PerturbationConfig& p) {
    return p.kind == "linear-action-degradation" || p.kind == "composite";
}

}  // namespace

int shift_at(const PerturbationConfig& p, std::size_t time_index) {
    if (!has_shift(p) || p.shifts.empty()) return 0;
    return p.shifts[time_index % p.shifts.size()];
}

double success_prob_at(const PerturbationConfig& p, std::size_t time_index, std::size_t lifetime) {
    if (!has_degradation(p)) return 1.0;
    if (lifetime <= 1) return p.degrade_from;
    const double frac = static_cast<double>(time_index) / static_cast<double>(lifetime - 1);
    return std::clamp(p.degrade_from + (p.degrade_to - p.degrade_from) * frac, 0.0, 1.0);
}

env::GridObs shift_target_channel(const env::GridObs& obs, int shift) {
    if (shift == 0) return obs;
    env::GridObs out = obs;
    for (int row = 0; row < env::kViewSize; ++row)
        for (int col = 0; col < env::kViewSize; ++col) out.at(5, row, col) = 0.0;
    const int dir = shift > 0 ? 1 : -1;
    for (int row = 0; row < env::kViewSize; ++row) {
        for (int col = 0; col < env::kViewSize; ++col) {
            const double v = obs.at(5, row, col);
            if (v == 0.0) continue;
            // slide one column at a time; walls block, the view edge drops
            int at = col;
            bool dropped = false;
            for (int s = 0; s < std::abs(shift); ++s) {
                const int next = at + dir;
                if (next < 0 || next >= env::kViewSize) {
                    dropped = true;
                    break;
                }
                if (obs.at(0, row, next) != 0.0) break;
                at = next;
            }
            if (!dropped) out.at(5, row, at) = std::max(out.at(5, row, at), v);
        }
    }
    return out;
}

namespace {

// Episode view with the wrapper state (shift, success probability) frozen at
// construction; failed degraded actions advance the clock without effect.
struct PerturbedGridEnv final : comprl::TaskEnv {
    env::GridEnv grid;
    int shift = 0;
    bool degrade = false;
    env::Effect degraded_effect = env::Effect::TurnLeft;
    double success_prob = 1.0;
    Rng coin;

    PerturbedGridEnv(const env::GridTaskSpec& spec, int shift_, bool degrade_, int effect,
                     double prob, std::uint64_t seed)
        : grid(spec),
          shift(shift_),
          degrade(degrade_),
          degraded_effect(static_cast<env::Effect>(effect)),
          success_prob(prob),
          coin(seed) {}

    const env::GridTaskSpec& task() const override { return grid.spec; }
    env::GridObs reset(Rng& rng) override { return shift_target_channel(grid.reset(rng), shift); }
    env::GridObs observe() const override { return shift_target_channel(grid.observe(), shift); }
    bool episode_done() const override { return grid.state.done; }

    env::GridStepResult step(int action) override {
        if (degrade && env::permuted_effect(grid.spec.dynamics, action) == degraded_effect) {
            if (coin.uniform() >= success_prob) return env::step_skip(grid.state);
        }
        return grid.step(action);
    }
};

}  // namespace

std::unique_ptr<comprl::TaskEnv> wrap_env(const env::GridTaskSpec& spec,
                                          const PerturbationConfig& p, std::size_t time_index,
                                          std::size_t lifetime, std::uint64_t seed) {
    if (p.kind == "none") return std::make_unique<comprl::GridTaskEnv>(spec);
    return std::make_unique<PerturbedGridEnv>(
        spec, shift_at(p, time_index), has_degradation(p), p.degraded_effect,
        success_prob_at(p, time_index, lifetime), substream_seed(seed, "degrade"));
}

}  // namespace lcl::harness
