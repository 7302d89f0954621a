#pragma once

#include <optional>
#include <vector>

#include "lcl/models/dense.hpp"
#include "lcl/models/soft_order.hpp"

namespace lcl {

// A small MLP used as one module in a chain level.
struct ModuleNet {
    std::vector<DenseLayer> layers;

    ModuleNet() = default;
    ModuleNet(const std::vector<std::size_t>& dims, Activation hidden_act, bool linear_output,
              Rng& rng);

    std::size_t in_dim() const { return layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.back().out_dim(); }

    Vector forward(const Vector& x, std::vector<Vector>* inputs = nullptr,
                   std::vector<Vector>* pres = nullptr) const;
    Matrix forward_batch(const Matrix& x, std::vector<Matrix>* inputs = nullptr,
                         std::vector<Matrix>* pres = nullptr) const;
};

struct ModuleGrad {
    std::vector<DenseGrad> layers;

    ModuleGrad() = default;
    explicit ModuleGrad(const ModuleNet& m);
    void zero();
};

struct ModularTape {
    // Mirrors banks: [level][module]; only the selected modules are nonzero.
    std::vector<std::vector<ModuleGrad>> banks;
    void zero();
};

// Chained modular policy: level j receives its observation slice concatenated
// with the previous level's output and routes through one selected module.
struct ModularChainPolicy {
    std::vector<std::vector<ModuleNet>> banks;  // [level][module index]
    std::vector<std::size_t> slice_dims;        // per-level observation slice

    std::size_t levels() const { return banks.size(); }

    Vector forward(const std::vector<std::size_t>& selection, const std::vector<Vector>& slices);
    ModularTape backward(const Vector& upstream, Wrt wrt);
    ModularTape make_tape() const;

    // Batched variants for training; rows are samples. The cache is caller
    // owned so concurrent evaluations do not share state.
    struct BatchCache {
        std::vector<std::size_t> selection;
        std::vector<Matrix> level_inputs;                // concat(slice, prev out)
        std::vector<std::vector<Matrix>> layer_inputs;   // [level][layer]
        std::vector<std::vector<Matrix>> layer_pres;     // [level][layer]
    };
    Matrix forward_batch(const std::vector<std::size_t>& selection,
                         const std::vector<Matrix>& slice_batches, BatchCache* cache) const;
    void backward_batch(const BatchCache& cache, const Matrix& upstream, ModularTape& tape) const;

    void validate_selection(const std::vector<std::size_t>& selection) const;

  private:
    std::optional<BatchCache> cache_;
};

}  // namespace lcl
