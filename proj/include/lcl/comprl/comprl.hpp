#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lcl/core/binio.hpp"
#include "lcl/core/rng.hpp"
#include "lcl/env/gridworld.hpp"
#include "lcl/models/modular_chain.hpp"

namespace lcl::comprl {

// Modular lifelong RL on the gridworld. A fixed library of neural modules is
// combined per task by a discrete selection; new tasks are assimilated by
// picking modules (exhaustive search) and exploring on a copy, and knowledge
// is committed to the shared modules only by offline accommodation over the
// replay buffers of every task seen so far.

inline constexpr std::size_t kLevels = 3;  // static -> target -> agent
inline constexpr std::size_t kModulesPerLevel = 4;

using ModuleSelection = std::array<std::size_t, kLevels>;
using SelectionMap = std::map<std::string, ModuleSelection>;

// Paired actor/critic banks with identical routing. The agent level emits one
// value per action: logits for the actor, Q-values for the critic.
struct ModuleLibrary {
    ModularChainPolicy actor;
    ModularChainPolicy critic;

    bool initialized() const { return !actor.banks.empty(); }

    // FNV-1a over the raw parameter bytes of both chains; exploration must
    // leave it unchanged.
    std::uint64_t param_hash() const;

    // Gridworld preset: slices (245, 49, 49), hidden width 64, tanh modules,
    // linear agent-level output over the 6 actions.
    static ModuleLibrary make(Rng& rng);

    // Arbitrary chain for tests and toy domains. module_dims[level] lists the
    // layer sizes of one module at that level (including input and output).
    static ModuleLibrary make_custom(const std::vector<std::size_t>& slice_dims,
                                     const std::vector<std::vector<std::size_t>>& module_dims,
                                     std::size_t modules_per_level, Rng& rng);
};

// Episode interface the training loops run against; lets harness wrappers
// perturb observations or action execution without touching the world model.
struct TaskEnv {
    virtual ~TaskEnv() = default;
    virtual const env::GridTaskSpec& task() const = 0;
    virtual env::GridObs reset(Rng& rng) = 0;
    virtual env::GridStepResult step(int action) = 0;
    virtual env::GridObs observe() const = 0;
    virtual bool episode_done() const = 0;
};

// Plain pass-through over the gridworld.
struct GridTaskEnv final : TaskEnv {
    env::GridEnv env;

    explicit GridTaskEnv(const env::GridTaskSpec& spec) : env(spec) {}
    const env::GridTaskSpec& task() const override { return env.spec; }
    env::GridObs reset(Rng& rng) override { return env.reset(rng); }
    env::GridStepResult step(int action) override { return env.step(action); }
    env::GridObs observe() const override { return env.observe(); }
    bool episode_done() const override { return env.state.done; }
};

// Ground-truth module indices for a task: static = object index,
// target = color - 1, agent = dynamics permutation id.
ModuleSelection given_selection(const env::GridTaskSpec& spec);

// Disjoint initialization: task number t (0-based, t < modules-per-level)
// occupies module t at every level.
ModuleSelection init_selection(std::size_t task_number);

struct Transition {
    std::vector<Vector> obs;   // one slice per level
    std::vector<Vector> next;  // observation after the step
    int action = 0;
    double reward = 0.0;
    bool done = false;
};

// Per-task replay buffer. Once full, each push overwrites a uniformly random
// slot, so the contents decay geometrically toward recent behavior.
struct TaskReplay {
    std::size_t capacity = 100000;
    std::vector<Transition> data;

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    void push(Transition tr, Rng& rng);
};

// Fixed little-endian binary record file (layout documented in the README)
// so that accommodation can run as a separate CLI step.
void save_replay(const std::string& path, const TaskReplay& replay);
TaskReplay load_replay(const std::string& path);

enum class SelectMode { Given, Search };

// Given-mode returns the ground-truth mapping; search-mode rolls out every
// module combination with frozen parameters and returns the argmax of mean
// return, ties broken toward the lowest lexicographic triple.
ModuleSelection select_modules(const ModuleLibrary& lib, TaskEnv& env, SelectMode mode,
                               std::size_t rollouts_per_combo, Rng& rng);

struct PpoConfig {
    double lr = 1e-3;
    std::size_t steps_per_update = 4096;
    std::size_t minibatch = 256;
    std::size_t epochs = 4;
    double gae_lambda = 0.95;
    double gamma = 0.99;
    double entropy_coef = 0.5;
    double clip = 0.2;
};

struct ExploreResult {
    ModularChainPolicy actor;   // trained copies of the full banks
    ModularChainPolicy critic;
    std::vector<double> episode_returns;  // completed episodes, in order
};

// Clipped-surrogate policy gradient on a copy of the selected modules; the
// critic learns Q and the baseline is V(s) = max_a Q(s, a). Every visited
// transition lands in the replay buffer. The shared library is untouched.
ExploreResult explore(const ModuleLibrary& lib, const ModuleSelection& sel, TaskEnv& env,
                      std::size_t steps, const PpoConfig& cfg, TaskReplay& replay, Rng& rng);

struct BcqConfig {
    std::size_t epochs = 10;
    double tau = 0.3;
    double lr = 1e-3;
    std::size_t minibatch = 256;
    std::size_t target_sync = 1000;  // critic updates between target syncs
    double gamma = 0.99;
};

// Backup target for one transition: argmax of the online Q over actions the
// behavior policy deems likely enough, evaluated on the target Q. An empty
// allowed set falls back to the unrestricted argmax.
double bcq_target(double reward, bool done, double gamma, const Vector& next_q_online,
                  const Vector& next_q_target, const Vector& next_probs, double tau);

// Gradients of the weighted offline losses on one fixed batch of replay rows:
// behavior-cloning NLL for the actor, squared BCQ backup residual for the
// critic (bootstrapped through target_critic). Tapes must match the library's
// bank shapes; entries scale linearly with weight.
void offline_batch_gradients(const ModuleLibrary& lib, const ModularChainPolicy& target_critic,
                             const TaskReplay& rep, const std::vector<std::size_t>& idx,
                             const ModuleSelection& sel, const BcqConfig& cfg, double weight,
                             ModularTape& actor_grad, ModularTape& critic_grad);

// Mean offline losses of the current library on a whole replay buffer; the
// backup target uses the library's own critic.
struct OfflineEval {
    double actor_nll = 0.0;
    double critic_mse = 0.0;
};
OfflineEval offline_losses(const ModuleLibrary& lib, const TaskReplay& rep,
                           const ModuleSelection& sel, const BcqConfig& cfg);

// Discrete batch-constrained Q-learning over every stored task: the actor
// clones logged actions, the critic regresses on bcq_target, and only the
// modules in each task's selection move. task_weights scales each task's
// loss; weight 0 skips the task, absent tasks weigh 1.
void accommodate_offline(ModuleLibrary& lib, const std::map<std::string, TaskReplay>& replays,
                         const SelectionMap& selections, const BcqConfig& cfg, Rng& rng,
                         const std::map<std::string, double>& task_weights = {});

// Mean return over episodes rolled out with actions sampled from the actor's
// softmax; the post-exploration evaluation metric.
double evaluate_actor(const ModularChainPolicy& actor, const ModuleSelection& sel, TaskEnv& env,
                      std::size_t episodes, Rng& rng);

// Per-level mean activation of the selected module over a replay buffer's
// observations; the representation-drift fingerprint.
std::vector<Vector> module_mean_activations(const ModuleLibrary& lib, const TaskReplay& rep,
                                            const ModuleSelection& sel);

// Checkpoint-embeddable encodings (dims + parameters; records verbatim).
void write_library(BinWriter& w, const ModuleLibrary& lib);
ModuleLibrary read_library(BinReader& r);
void write_transitions(BinWriter& w, const TaskReplay& rep);
TaskReplay read_transitions(BinReader& r);

// Frozen-module rollouts sampling actions Boltzmann(temperature 1) over the
// Q-values of actions above the actor's likelihood threshold.
double evaluate_zero_shot(const ModuleLibrary& lib, const ModuleSelection& sel, TaskEnv& env,
                          std::size_t episodes, double tau, Rng& rng);

}  // namespace lcl::comprl
