#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lcl/comprl/comprl.hpp"
#include "lcl/core/matrix.hpp"
#include "lcl/core/rng.hpp"
#include "lcl/env/gridworld.hpp"

namespace lcl::harness {

// Experiment orchestration: named task sequences over the implemented
// lifelong learners, deterministic seeding through labeled sub-streams,
// metric emission as CSV/JSON, and checkpoint/resume at task boundaries.

// Per-task training budget knobs shared across algorithms: structure (module
// search rollouts / structure epochs / policy-search iterations), how often
// accommodation interleaves mid-task (0 = only at the end; policy-gradient
// learner only), and accommodation epochs.
struct Schedule {
    std::size_t structure_updates = 10;
    std::size_t adaptation_frequency = 0;
    std::size_t component_updates = 10;
};

// Environment drift applied across the task sequence; within one task the
// world is stationary. Cyclical mode shifts the perceived target channel by
// shifts[t mod period]; degradation mode makes the configured action effect
// succeed only with a probability that ramps linearly over the lifetime.
struct PerturbationConfig {
    std::string kind = "none";  // none | cyclical-target-shift |
                                // linear-action-degradation | composite
    std::vector<int> shifts = {-3, -2, -1, 0, 1, 2, 3, 2, 1, 0, -1, -2};
    int degraded_effect = 0;  // env::Effect value; default TurnLeft
    double degrade_from = 1.0;
    double degrade_to = 0.0;
};

struct SupervisedParams {
    std::string model = "linear";  // linear | soft-order
    std::size_t d = 10;
    std::size_t k_true = 4;  // generator dictionary size
    std::size_t k = 4;       // model components
    std::size_t tasks = 20;
    std::size_t samples_per_task = 256;
    double noise_std = 0.1;
    std::size_t init_tasks = 0;  // 0: smallest block covering every component
    std::size_t init_epochs = 100;
    std::size_t hidden = 16;  // soft-order only
    std::size_t depth = 0;    // soft-order only; 0 = k
    std::size_t minibatch = 32;
    double lr = 0.05;
    double ewc_lambda = 1e-3;
    std::size_t replay_per_task = 32;
    double expansion_tau = 0.05;
};

struct LpgFtwParams {
    std::size_t d = 6;
    std::size_t k_max = 5;
    std::size_t tasks = 30;
    std::size_t horizon = 20;
    double lambda = 1e-5;
    double mu = 1e-5;
    double sigma = 1.0;
    std::size_t episodes_per_step = 20;
    double lr = 1e-3;
    double delta = 0.05;
    double gamma = 1.0;
    std::string base = "npg";  // npg | reinforce
    std::size_t eval_episodes = 20;
};

struct ComprlParams {
    std::size_t hidden = 64;
    std::size_t replay_capacity = 100000;
    std::size_t exploration_steps = 200000;
    std::string select_mode = "search";  // search | given
    bool curriculum = true;
    std::size_t eval_episodes = 20;
    double zero_shot_tau = 0.3;
    std::vector<std::string> zero_shot_tasks;
    comprl::PpoConfig ppo;
    comprl::BcqConfig bcq;  // epochs taken from schedule.component_updates
};

struct NonstatParams {
    std::string weighting = "loss";  // oracle | loss | repr
    std::vector<std::size_t> changing_levels = {1};
};

struct ExperimentConfig {
    std::string algorithm = "comprl";  // supervised-comp | supervised-dyn |
                                       // lpg-ftw | comprl | comprl-nonstat
    std::string adaptation = "er";     // nft | ewc | er | fm
    std::string task_set = "grid-2x2x2";
    std::vector<std::string> tasks;  // explicit ids for task_set == "custom"
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::size_t stop_after_tasks = 0;  // 0 = all; early stop for resume tests
    Schedule schedule;
    SupervisedParams supervised;
    LpgFtwParams lpg;
    ComprlParams comp;
    NonstatParams nonstat;
    PerturbationConfig perturbation;
};

// JSON round trip. parse_config validates every field and names the bad key
// in the ConfigError; apply_override navigates dotted paths ("schedule.
// structureUpdates=0"); config_json is the canonical echo embedded in
// summary.json and hashed into checkpoints.
ExperimentConfig parse_config(const std::string& json_text);
std::string config_json(const ExperimentConfig& cfg);
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// ---- metrics ----

struct MetricRow {
    std::string task_id;
    std::string phase;  // start[-pre-search|-post-search], tune/online,
                        // update/offline, final, zero-shot
    std::string metric;
    std::int64_t step = 0;
    double value = 0.0;
};

struct MetricsTable {
    std::vector<MetricRow> rows;

    void add(std::string task, std::string phase, std::string metric, std::int64_t step,
             double value);
    // header "task_id,phase,metric,step,value", 17-significant-digit values
    std::string to_csv() const;
    static MetricsTable from_csv(const std::string& text);  // throws ConfigError
};

// final / forward per task for one metric, where forward is the last
// tune/online row and final the last final row. Tasks with forward <= 0 are
// skipped; a final row without a forward row (or no final rows at all)
// throws MissingPhase.
std::map<std::string, double> compute_forgetting(const MetricsTable& table,
                                                 const std::string& metric);

struct EvalTrajectory {
    Vector rewards;
    std::vector<std::uint8_t> success;  // per-step success indicator
};

// Mean summed reward and the fraction of trajectories with at least one
// success step.
std::pair<double, double> compute_return_success(const std::vector<EvalTrajectory>& trajectories);

// ---- perturbation wrappers ----

// Schedule values at one lifetime index (task ordinal).
int shift_at(const PerturbationConfig& p, std::size_t time_index);
double success_prob_at(const PerturbationConfig& p, std::size_t time_index, std::size_t lifetime);

// Target channel translated horizontally by `shift` view columns. Cells
// slide until blocked by a wall (from the wall channel) and are dropped if
// pushed outside the view.
env::GridObs shift_target_channel(const env::GridObs& obs, int shift);

// Episode view of one task under the wrapper state frozen at time_index.
// Degradation coin flips draw from a stream derived from `seed`.
std::unique_ptr<comprl::TaskEnv> wrap_env(const env::GridTaskSpec& spec,
                                          const PerturbationConfig& p, std::size_t time_index,
                                          std::size_t lifetime, std::uint64_t seed);

// ---- runs ----

struct RunResult {
    MetricsTable metrics;
    std::string metrics_csv;
    std::string summary_json;
};

// Executes the configured lifelong experiment, writing metrics.csv,
// summary.json, and checkpoints/task-<n>.bin under cfg.out_dir. Identical
// config+seed yields byte-identical metrics.csv. A resume checkpoint
// continues mid-sequence and reproduces the uninterrupted run exactly.
RunResult run(const ExperimentConfig& cfg, const std::string& resume_checkpoint = "");

// Re-evaluates every task recorded in a checkpoint (phase "final" rows).
MetricsTable eval_checkpoint(const ExperimentConfig& cfg, const std::string& checkpoint_path);

// Zero-shot evaluation of unseen gridworld tasks from checkpointed modules
// under their ground-truth selections (comprl checkpoints only).
MetricsTable zero_shot_checkpoint(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                                  const std::vector<std::string>& task_ids);

// Cross-seed aggregation for plotting: mean/stderr per (task, phase, metric,
// step) and per-task forgetting ratios.
std::string aggregate_report(const std::vector<std::string>& metrics_csvs);
std::string forgetting_report(const std::vector<std::string>& metrics_csvs,
                              const std::string& metric);

// Task-set resolution (exposed for tests): the ordered task list a config
// runs, after curriculum reordering.
std::vector<env::GridTaskSpec> grid_task_sequence(const ExperimentConfig& cfg);

}  // namespace lcl::harness
