#include "lcl/models/modular_chain.hpp"

#include "lcl/core/errors.hpp"

namespace lcl {

ModuleNet::ModuleNet(const std::vector<std::size_t>& dims, Activation hidden_act,
                     bool linear_output, Rng& rng) {
    layers.reserve(dims.size() - 1);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const bool last = (i + 2 == dims.size());
        DenseLayer layer(dims[i], dims[i + 1], last && linear_output ? Activation::Identity
                                                                     : hidden_act);
        layer.init(rng);
        layers.push_back(std::move(layer));
    }
}

Vector ModuleNet::forward(const Vector& x, std::vector<Vector>* inputs,
                          std::vector<Vector>* pres) const {
    Vector cur = x;
    for (const DenseLayer& layer : layers) {
        Vector pre;
        Vector next = layer.forward(cur, &pre);
        if (inputs) inputs->push_back(std::move(cur));
        if (pres) pres->push_back(std::move(pre));
        cur = std::move(next);
    }
    return cur;
}

Matrix ModuleNet::forward_batch(const Matrix& x, std::vector<Matrix>* inputs,
                                std::vector<Matrix>* pres) const {
    Matrix cur = x;
    for (const DenseLayer& layer : layers) {
        Matrix pre;
        Matrix next = layer.forward_batch(cur, &pre);
        if (inputs) inputs->push_back(std::move(cur));
        if (pres) pres->push_back(std::move(pre));
        cur = std::move(next);
    }
    return cur;
}

ModuleGrad::ModuleGrad(const ModuleNet& m) {
    layers.reserve(m.layers.size());
    for (const DenseLayer& l : m.layers) layers.emplace_back(l);
}

void ModuleGrad::zero() {
    for (DenseGrad& g : layers) g.zero();
}

void ModularTape::zero() {
    for (auto& bank : banks)
        for (ModuleGrad& g : bank) g.zero();
}

void ModularChainPolicy::validate_selection(const std::vector<std::size_t>& selection) const {
    if (selection.size() != banks.size())
        throw SelectionOutOfRange("selection length != number of levels");
    for (std::size_t lvl = 0; lvl < banks.size(); ++lvl)
        if (selection[lvl] >= banks[lvl].size())
            throw SelectionOutOfRange("module index out of range at level " + std::to_string(lvl));
}

ModularTape ModularChainPolicy::make_tape() const {
    ModularTape tape;
    tape.banks.resize(banks.size());
    for (std::size_t lvl = 0; lvl < banks.size(); ++lvl) {
        tape.banks[lvl].reserve(banks[lvl].size());
        for (const ModuleNet& m : banks[lvl]) tape.banks[lvl].emplace_back(m);
    }
    return tape;
}

Matrix ModularChainPolicy::forward_batch(const std::vector<std::size_t>& selection,
                                         const std::vector<Matrix>& slice_batches,
                                         BatchCache* cache) const {
    validate_selection(selection);
    if (slice_batches.size() != banks.size())
        throw SliceShapeMismatch("slice count != number of levels");
    const std::size_t n = slice_batches.front().rows;
    for (std::size_t lvl = 0; lvl < banks.size(); ++lvl)
        if (slice_batches[lvl].cols != slice_dims[lvl] || slice_batches[lvl].rows != n)
            throw SliceShapeMismatch("slice shape mismatch at level " + std::to_string(lvl));

    if (cache) {
        cache->selection = selection;
        cache->level_inputs.clear();
        cache->layer_inputs.assign(banks.size(), {});
        cache->layer_pres.assign(banks.size(), {});
    }
    Matrix prev;
    for (std::size_t lvl = 0; lvl < banks.size(); ++lvl) {
        Matrix in;
        if (lvl == 0) {
            in = slice_batches[0];
        } else {
            in = Matrix(n, slice_dims[lvl] + prev.cols);
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < slice_dims[lvl]; ++c)
                    in(r, c) = slice_batches[lvl](r, c);
                for (std::size_t c = 0; c < prev.cols; ++c)
                    in(r, slice_dims[lvl] + c) = prev(r, c);
            }
        }
        const ModuleNet& mod = banks[lvl][selection[lvl]];
        if (in.cols != mod.in_dim()) throw SliceShapeMismatch("module input dim mismatch");
        prev = mod.forward_batch(in, cache ? &cache->layer_inputs[lvl] : nullptr,
                                 cache ? &cache->layer_pres[lvl] : nullptr);
    }
    return prev;
}

void ModularChainPolicy::backward_batch(const BatchCache& cache, const Matrix& upstream,
                                        ModularTape& tape) const {
    Matrix g = upstream;
    for (std::size_t lvl = banks.size(); lvl-- > 0;) {
        const ModuleNet& mod = banks[lvl][cache.selection[lvl]];
        ModuleGrad& mg = tape.banks[lvl][cache.selection[lvl]];
        for (std::size_t li = mod.layers.size(); li-- > 0;) {
            g = mod.layers[li].backward_batch(cache.layer_inputs[lvl][li],
                                              cache.layer_pres[lvl][li], g, mg.layers[li].dw,
                                              mg.layers[li].db);
        }
        if (lvl == 0) break;
        // strip the slice part; only the previous level's output continues
        const std::size_t keep = g.cols - slice_dims[lvl];
        Matrix next(g.rows, keep);
        for (std::size_t r = 0; r < g.rows; ++r)
            for (std::size_t c = 0; c < keep; ++c) next(r, c) = g(r, slice_dims[lvl] + c);
        g = std::move(next);
    }
}

Vector ModularChainPolicy::forward(const std::vector<std::size_t>& selection,
                                   const std::vector<Vector>& slices) {
    std::vector<Matrix> batches(slices.size());
    for (std::size_t i = 0; i < slices.size(); ++i) {
        batches[i] = Matrix(1, slices[i].size());
        batches[i].data = slices[i];
    }
    BatchCache cache;
    const Matrix out = forward_batch(selection, batches, &cache);
    cache_ = std::move(cache);
    return out.data;
}

ModularTape ModularChainPolicy::backward(const Vector& upstream, Wrt wrt) {
    if (!cache_) throw NoCachedForward();
    ModularTape tape = make_tape();
    Matrix up(1, upstream.size());
    up.data = upstream;
    backward_batch(*cache_, up, tape);
    // There are no structure parameters here: selection is discrete, so
    // structure-only gradients are all zero.
    if (wrt == Wrt::StructureOnly) tape.zero();
    return tape;
}

}  // namespace lcl
