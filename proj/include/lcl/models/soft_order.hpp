#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcl/models/dense.hpp"

namespace lcl {

enum class Wrt { StructureOnly, ComponentsOnly, All };

struct SoftOrderTape {
    std::vector<DenseGrad> components;
    DenseGrad e;
    DenseGrad d;
    Matrix dpsi;  // k_active x depth
};

// Soft layer ordering: every depth computes a convex mixture of the shared
// component layers, with per-task mixing logits, between per-task input and
// output transforms. Task structure = (E, D, Psi); components are shared.
struct SoftOrderNet {
    struct Config {
        std::size_t input_dim = 0;
        std::size_t hidden_dim = 0;
        std::size_t output_dim = 0;
        std::size_t k = 0;      // initial number of components
        std::size_t depth = 0;  // defaults to k when 0
        Activation act = Activation::Relu;
    };

    struct TaskParams {
        DenseLayer e;
        DenseLayer d;
        Matrix psi;            // k_active x depth pre-softmax logits
        std::size_t k_active;  // components visible to this task
    };

    Config cfg;
    std::vector<DenseLayer> components;
    std::map<std::string, TaskParams> tasks;

    SoftOrderNet() = default;
    SoftOrderNet(Config c, Rng& rng);

    std::size_t k() const { return components.size(); }
    std::size_t depth() const { return cfg.depth; }

    void add_task(const std::string& task, Rng& rng);
    TaskParams& task_params(const std::string& task);
    const TaskParams& task_params(const std::string& task) const;

    // Mixture weights at one depth: softmax over the first `active` logits.
    static Vector mixture_weights(const Matrix& psi, std::size_t depth_j, std::size_t active);

    Vector forward(const std::string& task, const Vector& x, bool drop_new = false);
    SoftOrderTape backward(const Vector& upstream, Wrt wrt);

    SoftOrderTape make_tape(const std::string& task) const;
    void apply_sgd(const std::string& task, const SoftOrderTape& tape, double lr);

    // Appends a freshly initialized component. Existing tasks keep k_active,
    // so their outputs are untouched; when current_task is given its psi gains
    // a row of ones and it sees the new component.
    std::size_t add_component(Rng& rng, const std::string& current_task = "");
    void remove_last_component();

  private:
    struct Cache {
        std::string task;
        Vector x;
        bool drop_new = false;
        std::size_t active = 0;
        Vector pre_e;
        std::vector<Vector> depth_inputs;              // depth+1 entries, [0] = E output
        std::vector<std::vector<Vector>> comp_pre;     // [depth][component]
        std::vector<std::vector<Vector>> comp_post;    // [depth][component]
        std::vector<Vector> weights;                   // [depth] softmax weights
        Vector pre_d;
    };
    std::optional<Cache> cache_;
};

}  // namespace lcl
