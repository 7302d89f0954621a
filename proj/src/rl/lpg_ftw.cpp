#include "lcl/rl/lpg_ftw.hpp"

#include <cmath>

#include "lcl/core/errors.hpp"

namespace lcl {

double l1_sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

namespace {

// theta = L s using however many columns L currently has; padded s entries
// beyond that are zero by construction.
Vector dict_times(const Matrix& l, const Vector& s) {
    Vector out(l.rows, 0.0);
    const std::size_t k = std::min(l.cols, s.size());
    for (std::size_t j = 0; j < k; ++j) {
        if (s[j] == 0.0) continue;
        for (std::size_t i = 0; i < l.rows; ++i) out[i] += l(i, j) * s[j];
    }
    return out;
}

}  // namespace

LpgFtw::LpgFtw(const LpgFtwConfig& config) : cfg(config) {
    if (cfg.d == 0 || cfg.k_max == 0) throw InvalidConfig("LpgFtw: d and k_max must be positive");
    dict.d = cfg.d;
    dict.k_max = cfg.k_max;
    dict.lambda = cfg.lambda;
    dict.mu = cfg.mu;
    dict.l = Matrix(cfg.d, 0);
    const std::size_t n = cfg.d * cfg.k_max;
    dict.a = Matrix(n, n);
    dict.b.assign(n, 0.0);
}

void LpgFtw::add_contribution(const TaskRecord& rec, double direction) {
    const std::size_t d = dict.d;
    Vector w = scale(matvec(rec.h, rec.alpha), 2.0);
    add_scaled_inplace(w, rec.g, -1.0);
    for (std::size_t j = 0; j < dict.k_max; ++j) {
        if (rec.s[j] == 0.0) continue;
        for (std::size_t i = 0; i < d; ++i)
            dict.b[j * d + i] += direction * rec.s[j] * w[i];
        for (std::size_t j2 = 0; j2 < dict.k_max; ++j2) {
            if (rec.s[j2] == 0.0) continue;
            const double coef = direction * 2.0 * rec.s[j] * rec.s[j2];
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t i2 = 0; i2 < d; ++i2)
                    dict.a(j * d + i, j2 * d + i2) += coef * rec.h(i, i2);
        }
    }
}

void LpgFtw::solve_dictionary() {
    const double inv_t = 1.0 / static_cast<double>(dict.t_count);
    Matrix m = scale(dict.a, inv_t);
    for (std::size_t i = 0; i < m.rows; ++i) m(i, i) -= 2.0 * dict.lambda;
    const Vector rhs = scale(dict.b, inv_t);
    dict.l = unvec(solve_symmetric(m, rhs), dict.d, dict.k_max);
}

void LpgFtw::estimate_model(LinearTaskEnv& env, BaseLearner base, TaskRecord& rec,
                            Rng& rng) const {
    LinearGaussianPolicy policy{rec.alpha, cfg.sigma};
    auto batch = rollout(env, policy, cfg.episodes_per_step, rng, cfg.gamma);
    rec.g = reinforce_grad(policy, batch).g;
    if (base == BaseLearner::Reinforce) {
        rec.h = reinforce_hessian(policy, batch).h;
        return;
    }
    const Matrix f = fisher(policy, batch).f;
    Vector dir;
    try {
        dir = solve_symmetric(f, rec.g);
    } catch (const SingularMatrix&) {
        double tr = 0.0;
        for (std::size_t i = 0; i < f.rows; ++i) tr += f(i, i);
        dir = solve_symmetric(f, rec.g, 1e-6 * tr / static_cast<double>(f.rows));
    }
    const double quad = dot(rec.g, dir);
    const double eta = quad > 1e-12 ? std::sqrt(cfg.delta / quad) : 1.0;
    rec.h = scale(f, -1.0 / eta);
}

void LpgFtw::accommodate(TaskRecord& rec) {
    if (rec.h.rows != dict.d || rec.h.cols != dict.d || !is_symmetric(rec.h, 1e-9))
        throw NonSymmetricH("accommodate: Hessian missing or not symmetric");
    if (rec.s.size() != dict.k_max) throw InvalidConfig("accommodate: s must have k_max entries");
    if (rec.accumulated) {
        const TaskRecord& old = folded_.at(rec.task_id);
        if (old.h.data.empty())
            throw Error("accommodate: revisiting requires stored Hessians");
        add_contribution(old, -1.0);
    } else {
        ++dict.t_count;
    }
    add_contribution(rec, 1.0);
    rec.accumulated = true;
    folded_[rec.task_id] = rec;
    solve_dictionary();

    // curvature guard: the quadratic model should be concave over the span of
    // the components this task actually uses
    Matrix lhl = matmul(transpose(dict.l), matmul(rec.h, dict.l));
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < dict.k_max; ++j)
        if (rec.s[j] != 0.0) support.push_back(j);
    if (!support.empty()) {
        Matrix restricted(support.size(), support.size());
        for (std::size_t a = 0; a < support.size(); ++a)
            for (std::size_t b = 0; b < support.size(); ++b)
                restricted(a, b) = lhl(support[a], support[b]);
        const double top = max_eigenvalue_sym(restricted);
        if (top > 1e-8) curvature_violations.emplace_back(rec.task_id, top);
    }

    if (!cfg.store_hessians) {
        rec.h = Matrix();
        folded_[rec.task_id].h = Matrix();
    }
}

TaskRecord& LpgFtw::init_task(const std::string& task_id, LinearTaskEnv& env, BaseLearner base,
                              std::size_t iters, Rng& rng) {
    if (dict.t_count >= dict.k_max)
        throw CapacityReached("init_task: dictionary already has k_max columns");
    const std::size_t kc = dict.l.cols;
    const std::size_t d = cfg.d;
    Vector s = rng.uniform_vec(kc, -0.01, 0.01);
    Vector eps(d, 0.0);

    for (std::size_t iter = 0; iter < iters; ++iter) {
        Vector theta = dict_times(dict.l, s);
        add_scaled_inplace(theta, eps, 1.0);
        LinearGaussianPolicy policy{theta, cfg.sigma};
        auto batch = rollout(env, policy, cfg.episodes_per_step, rng, cfg.gamma);
        const Vector g = reinforce_grad(policy, batch).g;

        Vector joint_grad(kc + d);
        for (std::size_t j = 0; j < kc; ++j) {
            double lg = 0.0;
            for (std::size_t i = 0; i < d; ++i) lg += dict.l(i, j) * g[i];
            joint_grad[j] = lg - cfg.mu * l1_sign(s[j]);
        }
        for (std::size_t i = 0; i < d; ++i)
            joint_grad[kc + i] = g[i] - 2.0 * cfg.lambda * eps[i];

        if (base == BaseLearner::Reinforce) {
            for (std::size_t j = 0; j < kc; ++j) s[j] += cfg.lr * joint_grad[j];
            for (std::size_t i = 0; i < d; ++i) eps[i] += cfg.lr * joint_grad[kc + i];
            continue;
        }
        // natural step in the joint (s, eps) space: F_joint = J'FJ, J = [L I]
        const Matrix f = fisher(policy, batch).f;
        Matrix fj(kc + d, kc + d);
        Matrix fl(d, kc);  // F L
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < kc; ++j) {
                double acc = 0.0;
                for (std::size_t i2 = 0; i2 < d; ++i2) acc += f(i, i2) * dict.l(i2, j);
                fl(i, j) = acc;
            }
        for (std::size_t j = 0; j < kc; ++j)
            for (std::size_t j2 = 0; j2 < kc; ++j2) {
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i) acc += dict.l(i, j) * fl(i, j2);
                fj(j, j2) = acc;
            }
        for (std::size_t j = 0; j < kc; ++j)
            for (std::size_t i = 0; i < d; ++i) {
                fj(j, kc + i) = fl(i, j);
                fj(kc + i, j) = fl(i, j);
            }
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t i2 = 0; i2 < d; ++i2) fj(kc + i, kc + i2) = f(i, i2);
        // curvature of the -lambda||eps||^2 penalty (floored so the metric
        // stays positive definite when lambda is tiny); removes the null
        // space of J'FJ, the directions trading s against eps with no
        // change to the policy, where constraint-sized steps would blow up
        const double eps_curv = 2.0 * std::max(cfg.lambda, 1e-3);
        for (std::size_t i = 0; i < d; ++i) fj(kc + i, kc + i) += eps_curv;

        Vector joint(kc + d);
        for (std::size_t j = 0; j < kc; ++j) joint[j] = s[j];
        for (std::size_t i = 0; i < d; ++i) joint[kc + i] = eps[i];
        try {
            natural_ascent_step(joint, joint_grad, fj, cfg.delta);
        } catch (const ZeroGradient&) {
            break;
        }
        for (std::size_t j = 0; j < kc; ++j) s[j] = joint[j];
        for (std::size_t i = 0; i < d; ++i) eps[i] = joint[kc + i];
    }

    Matrix l_new(d, kc + 1);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < kc; ++j) l_new(i, j) = dict.l(i, j);
        l_new(i, kc) = eps[i];
    }
    Vector alpha = dict_times(dict.l, s);
    add_scaled_inplace(alpha, eps, 1.0);
    dict.l = std::move(l_new);

    TaskRecord& rec = records[task_id];
    rec.task_id = task_id;
    rec.sigma = cfg.sigma;
    rec.s.assign(dict.k_max, 0.0);
    for (std::size_t j = 0; j < kc; ++j) rec.s[j] = s[j];
    rec.s[kc] = 1.0;
    rec.alpha = std::move(alpha);
    estimate_model(env, base, rec, rng);

    if (!is_symmetric(rec.h, 1e-9)) throw NonSymmetricH("init_task: estimated H not symmetric");
    add_contribution(rec, 1.0);
    ++dict.t_count;
    rec.accumulated = true;
    folded_[task_id] = rec;
    if (!cfg.store_hessians) {
        rec.h = Matrix();
        folded_[task_id].h = Matrix();
    }
    return rec;
}

TaskRecord& LpgFtw::assimilate_task(const std::string& task_id, LinearTaskEnv& env,
                                    BaseLearner base, std::size_t iters,
                                    std::size_t adaptation_frequency, Rng& rng) {
    if (!initialized()) throw NotInitialized("assimilate_task: dictionary not fully initialized");
    if (adaptation_frequency == 0)
        throw InvalidConfig("assimilate_task: adaptation_frequency must be >= 1");
    TaskRecord& rec = records[task_id];
    Vector s;
    if (rec.accumulated) {
        s = rec.s;
    } else {
        rec.task_id = task_id;
        s = rng.uniform_vec(dict.k_max, -0.01, 0.01);
    }
    rec.sigma = cfg.sigma;

    bool converged = false;
    for (std::size_t iter = 1; iter <= iters; ++iter) {
        Vector theta = dict_times(dict.l, s);
        LinearGaussianPolicy policy{theta, cfg.sigma};
        auto batch = rollout(env, policy, cfg.episodes_per_step, rng, cfg.gamma);
        const Vector g = reinforce_grad(policy, batch).g;

        Vector grad_s(dict.k_max);
        for (std::size_t j = 0; j < dict.k_max; ++j) {
            double lg = 0.0;
            for (std::size_t i = 0; i < cfg.d; ++i) lg += dict.l(i, j) * g[i];
            grad_s[j] = lg - cfg.mu * l1_sign(s[j]);
        }

        if (base == BaseLearner::Reinforce) {
            add_scaled_inplace(s, grad_s, cfg.lr);
        } else {
            const Matrix f = fisher(policy, batch).f;
            const Matrix fs = matmul(transpose(dict.l), matmul(f, dict.l));
            try {
                natural_ascent_step(s, grad_s, fs, cfg.delta);
            } catch (const ZeroGradient&) {
                converged = true;
            }
        }

        if (iter % adaptation_frequency == 0 || iter == iters || converged) {
            rec.s = s;
            rec.alpha = dict_times(dict.l, s);
            estimate_model(env, base, rec, rng);
            accommodate(rec);
        }
        if (converged) break;
    }
    return rec;
}

double LpgFtw::surrogate_objective() const {
    const double fro = frobenius_norm(dict.l);
    double acc = -dict.lambda * fro * fro;
    if (dict.t_count == 0) return acc;
    double sum = 0.0;
    for (const auto& [id, rec] : folded_) {
        if (rec.h.data.empty())
            throw Error("surrogate_objective: requires stored Hessians");
        const Vector ls = dict_times(dict.l, rec.s);
        const Vector diff = sub(ls, rec.alpha);
        sum += -dict.mu * norm1(rec.s) + dot(diff, matvec(rec.h, diff)) + dot(rec.g, diff);
    }
    return acc + sum / static_cast<double>(dict.t_count);
}

std::map<std::string, double> LpgFtw::evaluate_all(std::map<std::string, LinearTaskEnv>& envs,
                                                   std::size_t episodes, Rng& rng) const {
    std::map<std::string, double> out;
    for (const auto& [id, rec] : records) {
        auto it = envs.find(id);
        if (it == envs.end()) throw UnknownTask("evaluate_all: no environment for " + id);
        LinearGaussianPolicy policy{dict_times(dict.l, rec.s), rec.sigma};
        out[id] = mean_return(it->second, policy, episodes, rng);
    }
    return out;
}

Vector LpgFtw::task_theta(const std::string& task_id) const {
    auto it = records.find(task_id);
    if (it == records.end()) throw UnknownTask("task_theta: " + task_id);
    return dict_times(dict.l, it->second.s);
}

namespace {

void write_record(BinWriter& w, const TaskRecord& rec) {
    w.put_str(rec.task_id);
    w.put_vec(rec.s);
    w.put_vec(rec.alpha);
    w.put_vec(rec.g);
    w.put_mat(rec.h);
    w.put_f64(rec.sigma);
    w.put_u8(rec.accumulated ? 1 : 0);
}

TaskRecord read_record(BinReader& r) {
    TaskRecord rec;
    rec.task_id = r.get_str();
    rec.s = r.get_vec();
    rec.alpha = r.get_vec();
    rec.g = r.get_vec();
    rec.h = r.get_mat();
    rec.sigma = r.get_f64();
    rec.accumulated = r.get_u8() != 0;
    return rec;
}

void write_records(BinWriter& w, const std::map<std::string, TaskRecord>& records) {
    w.put_u32(static_cast<std::uint32_t>(records.size()));
    for (const auto& [id, rec] : records) write_record(w, rec);
}

std::map<std::string, TaskRecord> read_records(BinReader& r) {
    std::map<std::string, TaskRecord> records;
    const std::uint32_t n = r.get_u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        TaskRecord rec = read_record(r);
        std::string id = rec.task_id;
        records.emplace(std::move(id), std::move(rec));
    }
    return records;
}

}  // namespace

void LpgFtw::save_state(BinWriter& w) const {
    w.put_mat(dict.l);
    w.put_mat(dict.a);
    w.put_vec(dict.b);
    w.put_u64(dict.t_count);
    write_records(w, records);
    write_records(w, folded_);
    w.put_u32(static_cast<std::uint32_t>(curvature_violations.size()));
    for (const auto& [task, eig] : curvature_violations) {
        w.put_str(task);
        w.put_f64(eig);
    }
}

void LpgFtw::load_state(BinReader& r) {
    dict.l = r.get_mat();
    dict.a = r.get_mat();
    dict.b = r.get_vec();
    dict.t_count = r.get_u64();
    records = read_records(r);
    folded_ = read_records(r);
    curvature_violations.resize(r.get_u32());
    for (auto& [task, eig] : curvature_violations) {
        task = r.get_str();
        eig = r.get_f64();
    }
}

}  // namespace lcl
