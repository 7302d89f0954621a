#include "lcl/rl/pg_base.hpp"

#include <cmath>

#include "lcl/core/errors.hpp"

namespace lcl {

void Trajectory::compute_returns() {
    returns.assign(size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = size(); i-- > 0;) {
        acc = rs[i] + gamma * acc;
        returns[i] = acc;
    }
}

double Trajectory::total_reward() const {
    double acc = 0.0;
    for (double r : rs) acc += r;
    return acc;
}

void compute_advantages(std::vector<Trajectory>& batch) {
    if (batch.empty()) throw EmptyBatch("compute_advantages: no trajectories");
    std::size_t max_len = 0;
    for (const auto& tr : batch) max_len = std::max(max_len, tr.size());
    Vector baseline(max_len, 0.0);
    std::vector<std::size_t> count(max_len, 0);
    for (const auto& tr : batch) {
        if (tr.returns.size() != tr.size())
            throw Error("compute_advantages: returns not cached");
        for (std::size_t i = 0; i < tr.size(); ++i) {
            baseline[i] += tr.returns[i];
            ++count[i];
        }
    }
    for (std::size_t i = 0; i < max_len; ++i) baseline[i] /= static_cast<double>(count[i]);
    for (auto& tr : batch) {
        tr.advantages.assign(tr.size(), 0.0);
        for (std::size_t i = 0; i < tr.size(); ++i)
            tr.advantages[i] = tr.returns[i] - baseline[i];
    }
}

namespace {

void check_batch(const LinearGaussianPolicy& policy, const std::vector<Trajectory>& batch) {
    if (batch.empty()) throw EmptyBatch("policy-gradient estimate over empty batch");
    if (policy.sigma <= 0.0) throw InvalidConfig("gradient estimators require sigma > 0");
    for (const auto& tr : batch)
        if (tr.advantages.size() != tr.size())
            throw Error("policy-gradient estimate: advantages not cached");
}

}  // namespace

PgEstimates reinforce_grad(const LinearGaussianPolicy& policy,
                           const std::vector<Trajectory>& batch) {
    check_batch(policy, batch);
    const std::size_t d = policy.theta.size();
    const double inv_s2 = 1.0 / (policy.sigma * policy.sigma);
    PgEstimates est;
    est.g.assign(d, 0.0);
    for (const auto& tr : batch)
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const double coef = (tr.us[i] - policy.mean(tr.xs[i])) * inv_s2 * tr.advantages[i];
            add_scaled_inplace(est.g, tr.xs[i], coef);
        }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (double& v : est.g) v *= inv_n;
    return est;
}

PgEstimates reinforce_hessian(const LinearGaussianPolicy& policy,
                              const std::vector<Trajectory>& batch) {
    check_batch(policy, batch);
    const std::size_t d = policy.theta.size();
    PgEstimates est;
    est.h = Matrix(d, d);
    for (const auto& tr : batch)
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const Vector& x = tr.xs[i];
            const double a = tr.advantages[i];
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c < d; ++c) est.h(r, c) += x[r] * x[c] * a;
        }
    const double coef = -1.0 / (2.0 * policy.sigma * policy.sigma * static_cast<double>(batch.size()));
    for (double& v : est.h.data) v *= coef;
    return est;
}

PgEstimates fisher(const LinearGaussianPolicy& policy, const std::vector<Trajectory>& batch) {
    check_batch(policy, batch);
    const std::size_t d = policy.theta.size();
    const double s2 = policy.sigma * policy.sigma;
    PgEstimates est;
    est.f = Matrix(d, d);
    std::size_t steps = 0;
    for (const auto& tr : batch)
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const double e = tr.us[i] - policy.mean(tr.xs[i]);
            const double coef = e * e / (s2 * s2);
            const Vector& x = tr.xs[i];
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c < d; ++c) est.f(r, c) += coef * x[r] * x[c];
            ++steps;
        }
    if (steps == 0) throw EmptyBatch("fisher: trajectories contain no steps");
    for (double& v : est.f.data) v /= static_cast<double>(steps);
    return est;
}

double natural_ascent_step(Vector& params, const Vector& g, const Matrix& f, double delta) {
    if (delta <= 0.0) throw InvalidConfig("natural step: delta must be positive");
    const std::size_t d = g.size();
    Vector dir;
    try {
        dir = solve_symmetric(f, g);
    } catch (const SingularMatrix&) {
        double tr = 0.0;
        for (std::size_t i = 0; i < d; ++i) tr += f(i, i);
        const double ridge = 1e-6 * tr / static_cast<double>(d);
        try {
            dir = solve_symmetric(f, g, ridge);
        } catch (const SingularMatrix&) {
            throw SingularFisher("natural step: Fisher singular even with ridge");
        }
    }
    const double quad = dot(g, dir);
    if (quad <= 1e-12) throw ZeroGradient("natural step: g'F^{-1}g <= 1e-12, no step taken");
    const double eta = std::sqrt(delta / quad);
    add_scaled_inplace(params, dir, eta);
    return eta;
}

double npg_step(LinearGaussianPolicy& policy, const Vector& g, const Matrix& f, double delta) {
    return natural_ascent_step(policy.theta, g, f, delta);
}

LinearTaskEnv LinearTaskEnv::sample(std::size_t d, std::size_t horizon, std::uint64_t seed) {
    Rng rng(seed);
    LinearTaskEnv env;
    env.d = d;
    env.horizon = horizon;
    env.m = Matrix(d, d);
    for (double& v : env.m.data) v = rng.normal();
    // rescale to spectral norm 0.8 so free dynamics are stable
    const Matrix mtm = matmul(transpose(env.m), env.m);
    const double top_sv = std::sqrt(std::max(max_eigenvalue_sym(mtm), 1e-12));
    for (double& v : env.m.data) v *= 0.8 / top_sv;
    env.n = rng.normal_vec(d);
    const double nn = norm2(env.n);
    for (double& v : env.n) v /= nn;
    env.q = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) env.q(i, i) = rng.uniform(0.5, 1.5);
    env.x_star = rng.uniform_vec(d, -1.0, 1.0);
    env.x.assign(d, 0.0);
    return env;
}

Vector LinearTaskEnv::reset(Rng& rng) {
    x = rng.uniform_vec(d, -1.0, 1.0);
    t = 0;
    return x;
}

double LinearTaskEnv::reward_at(const Vector& state, double u) const {
    Vector e = sub(state, x_star);
    return -dot(e, matvec(q, e)) - action_cost * u * u;
}

LinearTaskEnv::StepResult LinearTaskEnv::step(double u, Rng& rng) {
    const double r = reward_at(x, u);
    Vector next = matvec(m, x);
    add_scaled_inplace(next, n, u);
    if (noise_std > 0.0)
        for (double& v : next) v += rng.normal(0.0, noise_std);
    x = std::move(next);
    ++t;
    return {x, r, t >= horizon};
}

std::vector<Trajectory> rollout(LinearTaskEnv& env, const LinearGaussianPolicy& policy,
                                std::size_t n, Rng& rng, double gamma) {
    std::vector<Trajectory> batch(n);
    for (auto& tr : batch) {
        tr.gamma = gamma;
        Vector state = env.reset(rng);
        bool done = false;
        while (!done) {
            const double u = policy.sample(state, rng);
            const auto res = env.step(u, rng);
            tr.xs.push_back(state);
            tr.us.push_back(u);
            tr.rs.push_back(res.r);
            state = res.x;
            done = res.done;
        }
        tr.compute_returns();
    }
    compute_advantages(batch);
    return batch;
}

double mean_return(LinearTaskEnv& env, const LinearGaussianPolicy& policy, std::size_t n,
                   Rng& rng) {
    LinearGaussianPolicy det = policy;
    det.sigma = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Vector state = env.reset(rng);
        bool done = false;
        while (!done) {
            const auto res = env.step(det.mean(state), rng);
            acc += res.r;
            state = res.x;
            done = res.done;
        }
    }
    return acc / static_cast<double>(n);
}

}  // namespace lcl
