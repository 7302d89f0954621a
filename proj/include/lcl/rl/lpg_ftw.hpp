#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lcl/core/binio.hpp"
#include "lcl/core/matrix.hpp"
#include "lcl/core/rng.hpp"
#include "lcl/rl/pg_base.hpp"

namespace lcl {

enum class BaseLearner { Reinforce, Npg };

// l1 subgradient choice: 0 at 0.
double l1_sign(double v);

// Shared component dictionary and the second-order accumulators of its
// closed-form update vec(L) = (A/T - 2 lambda I)^{-1} (b/T).
struct ComponentDictionary {
    Matrix l;  // d x k; grows one column per task during initialization
    Matrix a;  // (d*k_max) x (d*k_max)
    Vector b;  // d*k_max
    std::size_t t_count = 0;
    double lambda = 1e-5;
    double mu = 1e-5;
    std::size_t k_max = 5;
    std::size_t d = 0;
};

// Everything retained about one task: its structure coefficients, the policy
// parameters the local quadratic model was anchored at, and that model's
// gradient/Hessian. `accumulated` means (s, alpha, g, h) are the exact values
// currently folded into A and b.
struct TaskRecord {
    std::string task_id;
    Vector s;      // length k_max, zero-padded past the columns seen at fold time
    Vector alpha;  // d
    Vector g;      // d
    Matrix h;      // d x d; dropped after folding unless revisits are enabled
    double sigma = 1.0;
    bool accumulated = false;
};

struct LpgFtwConfig {
    std::size_t d = 0;
    std::size_t k_max = 5;
    double lambda = 1e-5;
    double mu = 1e-5;
    double sigma = 1.0;
    std::size_t episodes_per_step = 20;
    double lr = 1e-3;    // step size for the plain-gradient base learner
    double delta = 0.05; // KL constraint for the natural-gradient base learner
    double gamma = 1.0;
    bool store_hessians = true;  // required for revisits and surrogate diagnostics
};

// Lifelong factored policy-gradient learner. New tasks train only their
// structure coefficients over the frozen dictionary; accommodation then
// refreshes the dictionary in closed form from the accumulated per-task
// quadratic models.
struct LpgFtw {
    LpgFtwConfig cfg;
    ComponentDictionary dict;
    std::map<std::string, TaskRecord> records;

    // Assumption guard: accommodations where the restricted curvature
    // s-support block of L'HL had a positive eigenvalue (logged, not fatal).
    std::vector<std::pair<std::string, double>> curvature_violations;

    explicit LpgFtw(const LpgFtwConfig& config);

    bool initialized() const { return dict.t_count >= dict.k_max; }

    // Trains (s, epsilon) jointly on a fresh task, appends epsilon as a new
    // dictionary column, and folds the task's quadratic model into A, b.
    TaskRecord& init_task(const std::string& task_id, LinearTaskEnv& env, BaseLearner base,
                          std::size_t iters, Rng& rng);

    // Trains s only (dictionary frozen); every adaptation_frequency steps and
    // at the end, runs accommodate with the current quadratic model.
    TaskRecord& assimilate_task(const std::string& task_id, LinearTaskEnv& env, BaseLearner base,
                                std::size_t iters, std::size_t adaptation_frequency, Rng& rng);

    // Folds rec's (s, alpha, g, h) into A, b (subtracting a previously
    // accumulated contribution first) and refreshes L in closed form.
    void accommodate(TaskRecord& rec);

    // -lambda ||L||_F^2 + (1/T) sum of the per-task quadratic models at the
    // current L. Diagnostics only; requires stored Hessians.
    double surrogate_objective() const;

    // Mean deterministic return per task with theta = L s(t).
    std::map<std::string, double> evaluate_all(std::map<std::string, LinearTaskEnv>& envs,
                                               std::size_t episodes, Rng& rng) const;

    Vector task_theta(const std::string& task_id) const;

    // Checkpoint body: dictionary, accumulators, and all per-task records
    // (including the fold snapshots revisits subtract). cfg is not stored.
    void save_state(BinWriter& w) const;
    void load_state(BinReader& r);

  private:
    // snapshot of the values currently folded into A, b per task, kept so a
    // revisit can subtract its stale contribution exactly
    std::map<std::string, TaskRecord> folded_;

    void add_contribution(const TaskRecord& rec, double direction);
    void solve_dictionary();
    void estimate_model(LinearTaskEnv& env, BaseLearner base, TaskRecord& rec, Rng& rng) const;
};

}  // namespace lcl
