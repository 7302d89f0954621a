#pragma once

#include <cstdint>
#include <vector>

#include "lcl/core/matrix.hpp"
#include "lcl/core/rng.hpp"

namespace lcl {

// Linear Gaussian policy over scalar actions: u ~ N(theta'x, sigma).
// sigma == 0 is allowed as the deterministic evaluation limit; the gradient
// estimators below require sigma > 0.
struct LinearGaussianPolicy {
    Vector theta;
    double sigma = 1.0;

    double mean(const Vector& x) const { return dot(theta, x); }
    double sample(const Vector& x, Rng& rng) const {
        return sigma == 0.0 ? mean(x) : rng.normal(mean(x), sigma);
    }
};

// One episode: states, scalar actions, rewards, and cached discounted
// returns-to-go / advantages (return-to-go minus a baseline).
struct Trajectory {
    std::vector<Vector> xs;
    Vector us;
    Vector rs;
    double gamma = 1.0;
    Vector returns;
    Vector advantages;

    std::size_t size() const { return us.size(); }
    void compute_returns();
    double total_reward() const;
};

// Gradient, half-Hessian, and Fisher estimates for a batch of trajectories.
// Each estimator fills only its own field.
struct PgEstimates {
    Vector g;
    Matrix h;
    Matrix f;
};

// Per-timestep mean return-to-go across the batch, subtracted as baseline.
void compute_advantages(std::vector<Trajectory>& batch);

// g = mean over trajectories of sum_i ((u_i - theta'x_i)/sigma^2) x_i A_i.
PgEstimates reinforce_grad(const LinearGaussianPolicy& policy,
                           const std::vector<Trajectory>& batch);

// H = -(1/(2 sigma^2)) * mean over trajectories of sum_i x_i x_i' A_i.
PgEstimates reinforce_hessian(const LinearGaussianPolicy& policy,
                              const std::vector<Trajectory>& batch);

// F = mean over all steps of ((u - theta'x)^2 / sigma^4) x x'.
PgEstimates fisher(const LinearGaussianPolicy& policy, const std::vector<Trajectory>& batch);

// theta += eta F^{-1} g with eta = sqrt(delta / (g'F^{-1}g)). Returns eta.
// Leaves theta unchanged and throws ZeroGradient when g'F^{-1}g <= 1e-12.
// A singular F gets one ridge retry (1e-6 * trace(F)/d) before SingularFisher.
double npg_step(LinearGaussianPolicy& policy, const Vector& g, const Matrix& f, double delta);

// Same update applied to an arbitrary parameter vector (used for structure
// coefficients and joint init-phase parameters).
double natural_ascent_step(Vector& params, const Vector& g, const Matrix& f, double delta);

// Linear dynamics x' = Mx + n u + w with quadratic tracking reward
// r = -(x - x*)'Q(x - x*) - c u^2, fixed horizon. Tasks are drawn from a
// seeded family so experiment sequences are reproducible.
struct LinearTaskEnv {
    std::size_t d = 0;
    Matrix m;
    Vector n;
    Matrix q;
    Vector x_star;
    double action_cost = 0.1;
    double noise_std = 0.0;
    std::size_t horizon = 20;

    Vector x;
    std::size_t t = 0;

    struct StepResult {
        Vector x;
        double r;
        bool done;
    };

    // Random stable dynamics (spectral norm 0.8), unit action gain, diagonal
    // PSD reward weights, target in [-1,1]^d.
    static LinearTaskEnv sample(std::size_t d, std::size_t horizon, std::uint64_t seed);

    Vector reset(Rng& rng);
    StepResult step(double u, Rng& rng);
    double reward_at(const Vector& state, double u) const;
};

// n episodes of env.horizon steps with u ~ N(theta'x, sigma); fills returns
// (discount gamma) and cross-trajectory baselined advantages.
std::vector<Trajectory> rollout(LinearTaskEnv& env, const LinearGaussianPolicy& policy,
                                std::size_t n, Rng& rng, double gamma = 1.0);

// Mean total (undiscounted) reward of deterministic rollouts; the evaluation
// metric used by the lifelong learners.
double mean_return(LinearTaskEnv& env, const LinearGaussianPolicy& policy, std::size_t n,
                   Rng& rng);

}  // namespace lcl
