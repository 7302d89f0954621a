#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lcl/core/binio.hpp"
#include "lcl/core/matrix.hpp"
#include "lcl/core/rng.hpp"
#include "lcl/models/linear_factored.hpp"
#include "lcl/models/soft_order.hpp"

namespace lcl::supervised {

enum class LossKind { Squared, Logistic };

// Plain sample container; splits of one task never share rows.
struct Dataset {
    std::vector<Vector> x;
    Vector y;  // squared: real target, logistic: +-1 label

    std::size_t size() const { return x.size(); }
    void push(Vector xi, double yi) {
        x.push_back(std::move(xi));
        y.push_back(yi);
    }
};

struct SupervisedTask {
    std::string id;
    Dataset train;
    Dataset validation;
    Dataset test;
    LossKind loss = LossKind::Squared;
};

// Ground-truth-dictionary benchmark: tasks share a hidden dictionary and each
// mixes at most two of its columns.
struct SyntheticSpec {
    std::size_t d = 10;
    std::size_t k_true = 4;
    std::size_t tasks = 20;
    std::size_t samples_per_task = 256;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::Squared;
};

struct SyntheticBenchmark {
    std::vector<SupervisedTask> tasks;
    Matrix phi_star;             // d x k_true, unit-norm columns
    std::vector<Vector> s_star;  // per-task mixing vectors, <= 2 nonzeros
};

// Labels y = s*' Phi*' x plus gaussian noise (sign thereof for logistic).
// Split sizes: train = samples_per_task, validation = samples_per_task / 4,
// test = samples_per_task, each at least 1.
SyntheticBenchmark generate_synthetic(const SyntheticSpec& spec, Rng& rng);

// Per-task replay buffers holding at most `capacity` samples drawn uniformly
// without replacement from the task's train split.
struct ReplayStore {
    struct Batch {
        Dataset data;
        LossKind loss = LossKind::Squared;
    };

    std::size_t capacity = 32;
    std::map<std::string, Batch> buffers;

    void put(const SupervisedTask& task, Rng& rng);
};

// Diagonal Fisher estimate plus the component parameters it anchors.
struct FisherDiag {
    std::string task;
    Vector diag;  // nonnegative, aligned with the flattened components
    Vector anchor;
};

enum class StepMask { InitComponents, Structure, StructureAndNew };

struct ExampleRef {
    const std::string* task;
    const Vector* x;
    double y;
    LossKind loss;
};

// Minimal hooks the lifelong loop needs from a compositional predictor.
// "Structure" is the task-private part (mixing coefficients plus any
// encoder/decoder heads); "components" are the shared dictionary.
struct ModelBackend {
    virtual ~ModelBackend() = default;

    virtual std::size_t k() const = 0;
    virtual std::size_t structure_slots() const = 0;  // one-hot slots per task
    virtual bool has_task(const std::string& task) const = 0;
    virtual void add_task(const std::string& task, Rng& rng) = 0;
    virtual void set_one_hot(const std::string& task, std::size_t slot, std::size_t comp) = 0;
    virtual std::vector<std::size_t> selected_components(const std::string& task) const = 0;

    virtual double predict(const std::string& task, const Vector& x, bool drop_new) = 0;
    // One averaged SGD step on `batch`; only parameters named by `mask` move.
    virtual void sgd_batch(const std::vector<ExampleRef>& batch, double lr, StepMask mask,
                           bool drop_new) = 0;
    // Mean loss gradient wrt the flattened shared components.
    virtual Vector component_grad(const std::vector<ExampleRef>& batch) = 0;
    virtual Vector component_params() const = 0;
    virtual void set_component_params(const Vector& p) = 0;
    virtual Vector structure_params(const std::string& task) const = 0;

    virtual std::size_t add_component(Rng& rng, const std::string& task) = 0;
    virtual void remove_last_component() = 0;

    // Full parameter snapshot for checkpoints; load expects a writer output
    // from the same backend kind.
    virtual void save_state(BinWriter& w) const = 0;
    virtual void load_state(BinReader& r) = 0;
};

enum class AssimilationMode { Compositional, Dynamic };
enum class AdaptationBase { Nft, Ewc, Er };
enum class ExpandDecision { Keep, Discard };

// Keep iff the relative improvement of a1 over a2 reaches tau. Metrics may be
// negative (negative RMSE), so the baseline enters as |a2|; a2 == 0 is the
// degenerate zero-baseline case and counts as keep.
ExpandDecision expand_decision(double a1, double a2, double tau);

struct LearnerConfig {
    std::size_t minibatch = 32;
    double lr = 0.05;
    double ewc_lambda = 1e-3;
    std::size_t replay_per_task = 32;  // n_m
    double expansion_tau = 0.05;
};

// Three-stage lifelong learner over a compositional predictor: joint
// initialization on the first tasks, structure-only (or structure + fresh
// component) assimilation per task, and component adaptation via plain
// fine-tuning, diagonal-EWC, or experience replay.
struct LifelongLearner {
    LearnerConfig cfg;
    Rng rng{0};
    std::unique_ptr<ModelBackend> model;
    ReplayStore replay;
    std::vector<FisherDiag> anchors;
    bool initialized = false;
    std::optional<std::size_t> pending_component;  // added by dynamic mode,
    std::string pending_task;                      // resolved by expand_check

    static LifelongLearner linear(std::size_t d, std::size_t k, LearnerConfig cfg,
                                  std::uint64_t seed);
    static LifelongLearner soft_order(SoftOrderNet::Config model_cfg, LearnerConfig cfg,
                                      std::uint64_t seed);

    // Pooled minibatch training of the shared components on the given tasks;
    // task structures are frozen at random one-hot picks that cover every
    // component at least once.
    void initialize_joint(const std::vector<SupervisedTask>& tasks, std::size_t epochs);

    // Compositional: only this task's structure moves. Dynamic: additionally
    // appends a fresh component and pairs every minibatch step with a
    // drop-the-new-component step.
    void assimilate(const SupervisedTask& task, AssimilationMode mode, std::size_t epochs);

    // Updates shared components on the task's train split. EWC adds the
    // diagonal penalty pulling towards every stored anchor; ER replays each
    // stored task batch (with that task's own loss) after every minibatch.
    void adapt(const SupervisedTask& task, AdaptationBase base, std::size_t epochs);

    // Validation metric with vs without the pending component; discard removes
    // the component again.
    ExpandDecision expand_check(const SupervisedTask& task, double tau = 0.05);

    // Accuracy for logistic tasks, negative RMSE for squared ones.
    double evaluate(const SupervisedTask& task, const Dataset& split, bool drop_new = false);
    double rmse(const SupervisedTask& task, const Dataset& split);
    // Current value of the EWC anchor penalty (zero at the anchors).
    double ewc_penalty() const;

    // Checkpoint body: rng stream, model parameters, replay store, anchors,
    // and the expansion bookkeeping. cfg is not stored; the caller rebuilds
    // the learner from its own configuration first.
    void save_state(BinWriter& w) const;
    void load_state(BinReader& r);
};

// Joint multitask oracle: dictionary and every task's coefficients trained
// together over the pooled data.
LinearFactoredModel train_mtl_oracle(const std::vector<SupervisedTask>& tasks, std::size_t d,
                                     std::size_t k, std::size_t epochs, const LearnerConfig& cfg,
                                     Rng& rng);

// Single shared weight vector fine-tuned across the tasks in sequence; the
// no-components lower bar.
Vector train_monolithic(const std::vector<SupervisedTask>& tasks, std::size_t d,
                        std::size_t epochs, const LearnerConfig& cfg, Rng& rng);

double model_rmse(const LinearFactoredModel& m, const std::string& task, const Dataset& split);
double vector_rmse(const Vector& w, const Dataset& split);

}  // namespace lcl::supervised
